// Command-line front end: scenario runner, slope fitting, diagnostics
// summaries, and confidence-constant calibration.

#include "lqgopt/lqgopt.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace lqgopt;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, int jobs) {
    const ScenarioConfig cfg = load_scenario(config_path);
    const std::string dir = out_dir.empty() ? cfg.name + "_out" : out_dir;
    const json aggregate = run_scenario(cfg, dir, jobs);
    std::cout << "scenario '" << cfg.name << "' -> " << dir << "\n";
    bool any_failed = false;
    for (const auto& [agent, a] : aggregate.at("agents").items()) {
        const auto& failed = a.at("failed_runs");
        any_failed = any_failed || !failed.empty();
        std::cout << "  " << agent << ": " << a.at("runs_ok").get<long>() << " runs";
        if (a.contains("final_regret_median"))
            std::cout << ", median final regret "
                      << a.at("final_regret_median").get<double>();
        if (a.contains("slope_median"))
            std::cout << ", median regret slope " << a.at("slope_median").get<double>();
        if (!failed.empty()) std::cout << ", " << failed.size() << " FAILED";
        std::cout << "\n";
    }
    return any_failed ? 3 : 0;
}

int cmd_slope(const std::string& trace_path, double jstar, bool jstar_set, long from,
              long to) {
    const RunTrace trace = RunTrace::read_csv(trace_path);
    if (!jstar_set) {
        // sidecar diagnostics JSON carries J*
        fs::path sidecar(trace_path);
        sidecar.replace_extension(".json");
        if (!fs::exists(sidecar))
            throw ConfigError("no --jstar given and no sidecar " + sidecar.string());
        std::ifstream in(sidecar);
        jstar = json::parse(in).at("J_star").get<double>();
    }
    const long t_hi = to > 0 ? to : static_cast<long>(trace.rows.size()) - 1;
    const long t_lo = from > 0 ? from : std::max<long>(1, t_hi / 50);
    const SlopeFit fit = fit_regret_slope(trace, jstar, t_lo, t_hi);
    json out{{"trace", trace_path},
             {"J_star", jstar},
             {"window", {t_lo, t_hi}},
             {"slope", fit.slope},
             {"stderr", fit.stderr_slope},
             {"shift", fit.shift},
             {"points", fit.points}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_diag(const std::string& run_dir) {
    std::ifstream in(run_dir + "/aggregate.json");
    if (!in) throw ConfigError("no aggregate.json under " + run_dir);
    const json aggregate = json::parse(in);
    std::cout << "scenario: " << aggregate.at("name").get<std::string>()
              << "  J* = " << aggregate.at("J_star").get<double>() << "\n";
    for (const auto& [agent, a] : aggregate.at("agents").items()) {
        std::cout << agent << ":\n";
        if (a.contains("containment_frequency"))
            std::cout << "  containment frequency: "
                      << a.at("containment_frequency").get<double>() << " over "
                      << a.at("epochs_total").get<long>() << " epochs ("
                      << a.at("epochs_degraded").get<long>() << " degraded)\n";
        if (a.contains("warmup_excitation_ok_fraction"))
            std::cout << "  excitation ok (warmup/adaptive): "
                      << a.at("warmup_excitation_ok_fraction").get<double>() << " / "
                      << a.at("adaptive_excitation_ok_fraction").get<double>() << "\n";
        if (a.contains("guards_respected_all"))
            std::cout << "  guards respected on all runs: "
                      << (a.at("guards_respected_all").get<bool>() ? "yes" : "no") << "\n";
        if (a.contains("est_error_slope_median"))
            std::cout << "  estimation-error decay slope (median): "
                      << a.at("est_error_slope_median").get<double>() << "\n";
        if (a.contains("slope_median"))
            std::cout << "  regret slope (median): " << a.at("slope_median").get<double>()
                      << "\n";
    }
    return 0;
}

// Fit the problem-dependent constants of the parameter confidence radii on
// synthetic warm-up runs of the configured plant: c is chosen so that the
// (1 - delta) quantile of aligned-error / unit-radius equals one.
int cmd_calibrate(const std::string& config_path, int n_seeds) {
    const ScenarioConfig cfg = load_scenario(config_path);
    const LinearSystem& sys = cfg.plant;
    const CostWeights& w = cfg.cost;
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    AgentConfig acfg = cfg.agent;
    const long H = acfg.H > 0 ? acfg.H
                              : choose_H(cfg.T, acfg.upsilon_bound, acfg.c_H, sys.m(),
                                         acfg.lambda, sys.n());
    const long H_s =
        acfg.sysid_H > 0 ? std::min(acfg.sysid_H, H) : std::min<long>(H, 2 * sys.n() + 3);
    const auto [d1, d2] = default_hankel_split(H_s, sys.n());
    const SystemEstimate truth_ref = balanced_truth(sys, ss, H_s, d1, d2);
    const MarkovParams M_true = markov_params(sys, ss, H);
    const double S = acfg.S > 0.0 ? acfg.S : 2.0 * M_true.M.norm();
    const double noise_norm =
        acfg.noise_norm > 0.0
            ? acfg.noise_norm
            : spectral_norm(sys.C * ss.Sigma * sys.C.transpose() +
                            sys.sigma_z * sys.sigma_z * Mat::Identity(sys.m(), sys.m()));

    const MarkovParams M_true_sub = truncate_blocks(M_true, H_s);

    // pass 1: the rate constant of the estimation-theorem decay shape,
    // c_M = quantile(actual ||(Mhat - M) E_sub|| * sqrt(t)) at the warm-up end
    std::vector<double> scaled_err;
    // held-out seed range, disjoint from any experiment seed list
    const std::uint64_t seed_base = 1000000;
    struct CalRun {
        double m_bound_ellipsoid;
        Mat Mhat;
    };
    std::vector<CalRun> runs;
    for (int seed = 0; seed < n_seeds; ++seed) {
        const WarmupResult run = warmup(sys, w, acfg, seed_base + seed, H);
        const double beta =
            confidence_beta(run.dataset, acfg.delta, S, noise_norm, H, acfg.T_w, cfg.T);
        const Mat Mhat = run.dataset.estimate_M();
        const MarkovParams mp{Mhat, H, sys.m(), sys.p()};
        scaled_err.push_back(spectral_norm(truncate_blocks(mp, H_s).M - M_true_sub.M) *
                             std::sqrt(static_cast<double>(acfg.T_w)));
        runs.push_back(
            {m_two_norm_bound_sub(run.dataset, beta, sys.m(), sys.p(), H, H_s), Mhat});
    }
    const double c_M = quantile_of(scaled_err, 1.0 - acfg.delta);

    // pass 2: radius constants against the blended bound
    std::vector<double> ratio_A, ratio_B, ratio_L;
    int extraction_failures = 0;
    for (const CalRun& run : runs) {
        const double m_bound =
            std::min(run.m_bound_ellipsoid, c_M / std::sqrt(static_cast<double>(acfg.T_w)));
        const MarkovParams mp{run.Mhat, H, sys.m(), sys.p()};
        try {
            const SystemEstimate est =
                extract(hankelize(truncate_blocks(mp, H_s), d1, d2), sys.n());
            const AlignedErrors ae = align_similarity(est, truth_ref);
            const ParamConfidence unit = param_confidence(m_bound, est, sys.n(), H_s);
            ratio_A.push_back(ae.err_A / unit.beta_A);
            ratio_B.push_back(std::max(ae.err_B, ae.err_C) / unit.beta_B);
            // beta_L with c2 = c3 = 1 as the unit feature
            ratio_L.push_back(ae.err_L / unit.beta_L);
        } catch (const std::exception&) {
            ++extraction_failures;
        }
    }
    if (ratio_A.empty()) throw std::runtime_error("calibration produced no usable runs");
    const double c1 = quantile_of(ratio_A, 1.0 - acfg.delta);
    const double cB = quantile_of(ratio_B, 1.0 - acfg.delta);
    const double c23 = quantile_of(ratio_L, 1.0 - acfg.delta);
    json out{{"c1", c1},
             {"c2", c23},
             {"c3", c23},
             {"c_B", cB},
             {"c_M", c_M},
             {"seeds", n_seeds},
             {"extraction_failures", extraction_failures},
             {"H", H},
             {"sysid_H", H_s},
             {"T_w", acfg.T_w},
             {"delta", acfg.delta}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive LQG control experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, trace_path, run_dir;
    int jobs = 0;
    double jstar = 0.0;
    long from = 0, to = 0;
    int n_seeds = 50;

    auto* run = app.add_subcommand("run", "run a scenario config");
    run->add_option("config", config_path, "scenario JSON")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--jobs", jobs, "worker threads (0 = hardware)");

    auto* slope = app.add_subcommand("slope", "fit the regret slope of a trace");
    slope->add_option("trace", trace_path, "trace CSV")->required();
    auto* jopt = slope->add_option("--jstar", jstar, "optimal average cost");
    slope->add_option("--from", from, "window start (default T/50)");
    slope->add_option("--to", to, "window end (default T)");

    auto* diag = app.add_subcommand("diag", "summarize a run directory");
    diag->add_option("dir", run_dir, "scenario output directory")->required();

    auto* calibrate = app.add_subcommand("calibrate", "fit confidence constants c1..c3");
    calibrate->add_option("config", config_path, "scenario JSON")->required();
    calibrate->add_option("--seeds", n_seeds, "number of calibration runs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, jobs);
        if (slope->parsed()) return cmd_slope(trace_path, jstar, jopt->count() > 0, from, to);
        if (diag->parsed()) return cmd_diag(run_dir);
        if (calibrate->parsed()) return cmd_calibrate(config_path, n_seeds);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
