#pragma once

#include "lqgopt/agent.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace lqgopt {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct ScenarioConfig {
    std::string name = "scenario";
    LinearSystem plant;
    CostWeights cost;
    AgentConfig agent;
    long T = 10000;
    std::vector<std::uint64_t> seeds;
    std::vector<AgentMode> agents;
    long est_error_window_lo = 1000;  // window for the estimation-error decay fit
    long est_error_window_hi = 0;     // 0 -> T
};

namespace detail {

inline Mat parse_matrix(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ConfigError(field + ": expected an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
    Mat M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw ConfigError(field + ": ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

inline json matrix_to_json(const Mat& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key + ": wrong type");
    }
}

}  // namespace detail

/// In-repo canonical test plant: two-state chain with eigenvalues 0.9 and 0.8.
inline LinearSystem canonical_plant() {
    LinearSystem sys;
    sys.A = (Mat(2, 2) << 0.9, 0.1, 0.0, 0.8).finished();
    sys.B = (Mat(2, 1) << 0.0, 1.0).finished();
    sys.C = (Mat(1, 2) << 1.0, 0.0).finished();
    sys.sigma_w = 1.0;
    sys.sigma_z = 1.0;
    return sys;
}

inline LinearSystem scalar_plant() {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    return sys;
}

inline LinearSystem chain2_plant() {
    LinearSystem sys;
    sys.A = (Mat(2, 2) << 0.5, 1.0, 0.0, 0.5).finished();
    sys.B = (Mat(2, 1) << 0.0, 1.0).finished();
    sys.C = (Mat(1, 2) << 1.0, 0.0).finished();
    return sys;
}

/// Rejection-sampled random stable system: A rescaled to the target spectral
/// radius, Gaussian B and C, redrawn until minimal.
inline LinearSystem random_stable_plant(const RandomSystemOptions& opt, std::uint64_t seed) {
    GaussianStream rng(seed, "plant/random");
    for (int attempt = 0; attempt < 256; ++attempt) {
        LinearSystem sys;
        Mat A = rng.matrix(opt.n, opt.n);
        const double rho = spectral_radius(A);
        if (rho <= 0.0) continue;
        sys.A = A * (opt.rho_max / rho);
        sys.B = rng.matrix(opt.n, opt.p);
        sys.C = rng.matrix(opt.m, opt.n);
        sys.sigma_w = opt.sigma_w;
        sys.sigma_z = opt.sigma_z;
        const StructuralReport rep = structural_checks(sys.A, sys.B, sys.C);
        if (rep.controllable && rep.observable) return sys;
    }
    throw ConfigError("random_stable: could not draw a minimal system");
}

inline LinearSystem parse_plant(const json& j) {
    if (!j.contains("type")) throw ConfigError("plant.type: missing");
    const std::string type = j.at("type").get<std::string>();
    LinearSystem sys;
    if (type == "canonical") {
        sys = canonical_plant();
    } else if (type == "scalar") {
        sys = scalar_plant();
    } else if (type == "chain2") {
        sys = chain2_plant();
    } else if (type == "random_stable") {
        RandomSystemOptions opt;
        opt.n = detail::get_or<Eigen::Index>(j, "n", 3);
        opt.m = detail::get_or<Eigen::Index>(j, "m", 1);
        opt.p = detail::get_or<Eigen::Index>(j, "p", 1);
        opt.rho_max = detail::get_or<double>(j, "rho", 0.9);
        sys = random_stable_plant(opt, detail::get_or<std::uint64_t>(j, "seed", 0));
    } else if (type == "explicit") {
        if (!j.contains("A") || !j.contains("B") || !j.contains("C"))
            throw ConfigError("plant: explicit type needs A, B, C");
        sys.A = detail::parse_matrix(j.at("A"), "plant.A");
        sys.B = detail::parse_matrix(j.at("B"), "plant.B");
        sys.C = detail::parse_matrix(j.at("C"), "plant.C");
    } else {
        throw ConfigError("plant.type: unknown generator '" + type + "'");
    }
    sys.sigma_w = detail::get_or<double>(j, "sigma_w", sys.sigma_w);
    sys.sigma_z = detail::get_or<double>(j, "sigma_z", sys.sigma_z);
    return sys;
}

inline AgentMode parse_agent_mode(const std::string& s) {
    if (s == "lqgopt") return AgentMode::LqgOpt;
    if (s == "ce") return AgentMode::CertaintyEquivalence;
    if (s == "nonadaptive") return AgentMode::NonAdaptiveCommit;
    if (s == "oracle") return AgentMode::Oracle;
    throw ConfigError("agents: unknown agent '" + s + "'");
}

inline AgentConfig parse_agent_config(const json& j) {
    AgentConfig cfg;
    cfg.T_w = detail::get_or<long>(j, "T_w", cfg.T_w);
    cfg.sigma_u = detail::get_or<double>(j, "sigma_u", cfg.sigma_u);
    cfg.H = detail::get_or<long>(j, "H", cfg.H);
    cfg.sysid_H = detail::get_or<long>(j, "sysid_H", cfg.sysid_H);
    cfg.upsilon_bound = detail::get_or<double>(j, "upsilon_bound", cfg.upsilon_bound);
    cfg.c_H = detail::get_or<double>(j, "c_H", cfg.c_H);
    cfg.lambda = detail::get_or<double>(j, "lambda", cfg.lambda);
    cfg.delta = detail::get_or<double>(j, "delta", cfg.delta);
    cfg.S = detail::get_or<double>(j, "S", cfg.S);
    cfg.noise_norm = detail::get_or<double>(j, "noise_norm", cfg.noise_norm);
    cfg.c_M = detail::get_or<double>(j, "c_M", cfg.c_M);
    cfg.ofu.budget = detail::get_or<long>(j, "ofu_budget", cfg.ofu.budget);
    cfg.ofu.sweeps = detail::get_or<int>(j, "ofu_sweeps", cfg.ofu.sweeps);
    cfg.admissibility.rho_max = detail::get_or<double>(j, "rho_max", 0.99);
    cfg.admissibility.upsilon_max = detail::get_or<double>(j, "upsilon_max", 0.99);
    cfg.admissibility.P_cap = detail::get_or<double>(j, "P_cap", 1e3);
    cfg.admissibility.K_cap = detail::get_or<double>(j, "K_cap", 1e3);
    cfg.admissibility.L_cap = detail::get_or<double>(j, "L_cap", 1e3);
    cfg.admissibility.sigma_c_floor = detail::get_or<double>(j, "sigma_c_floor", 1e-6);
    cfg.admissibility.gcl_horizon = detail::get_or<long>(j, "gcl_horizon", 0);
    cfg.confidence.c1 = detail::get_or<double>(j, "c1", 1.0);
    cfg.confidence.c_B = detail::get_or<double>(j, "c_B", 1.0);
    cfg.confidence.c2 = detail::get_or<double>(j, "c2", 1.0);
    cfg.confidence.c3 = detail::get_or<double>(j, "c3", 1.0);
    cfg.guard_scale = detail::get_or<double>(j, "guard_scale", cfg.guard_scale);
    cfg.y_guard = detail::get_or<double>(j, "y_guard", 0.0);
    cfg.xhat_guard = detail::get_or<double>(j, "xhat_guard", 0.0);
    cfg.divergence_guard = detail::get_or<double>(j, "divergence_guard", 1e6);
    cfg.checkpoints = detail::get_or<int>(j, "checkpoints", cfg.checkpoints);
    return cfg;
}

inline ScenarioConfig parse_scenario(const json& j) {
    ScenarioConfig cfg;
    cfg.name = detail::get_or<std::string>(j, "name", "scenario");
    if (!j.contains("plant")) throw ConfigError("plant: missing");
    cfg.plant = parse_plant(j.at("plant"));
    const Eigen::Index m = cfg.plant.m(), p = cfg.plant.p();
    cfg.cost.Q = Mat::Identity(m, m);
    cfg.cost.R = Mat::Identity(p, p);
    if (j.contains("cost")) {
        const json& jc = j.at("cost");
        if (jc.contains("Q"))
            cfg.cost.Q = jc.at("Q").is_number()
                             ? Mat(jc.at("Q").get<double>() * Mat::Identity(m, m))
                             : detail::parse_matrix(jc.at("Q"), "cost.Q");
        if (jc.contains("R"))
            cfg.cost.R = jc.at("R").is_number()
                             ? Mat(jc.at("R").get<double>() * Mat::Identity(p, p))
                             : detail::parse_matrix(jc.at("R"), "cost.R");
    }
    cfg.agent = j.contains("agent_config") ? parse_agent_config(j.at("agent_config"))
                                           : AgentConfig{};
    cfg.T = detail::get_or<long>(j, "T", cfg.T);
    if (cfg.T <= 0) throw ConfigError("T: must be positive");
    if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty())
        throw ConfigError("seeds: must be a non-empty array");
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    if (!j.contains("agents") || !j.at("agents").is_array() || j.at("agents").empty())
        throw ConfigError("agents: must be a non-empty array");
    for (const auto& a : j.at("agents")) cfg.agents.push_back(parse_agent_mode(a.get<std::string>()));
    cfg.est_error_window_lo = detail::get_or<long>(j, "est_error_window_lo", 1000);
    cfg.est_error_window_hi = detail::get_or<long>(j, "est_error_window_hi", 0);
    return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Serialization of run outputs
// ---------------------------------------------------------------------------

inline json to_json(const ExcitationReport& rep) {
    json hist = json::array();
    for (const auto& pt : rep.history)
        hist.push_back({{"t", pt.t}, {"lambda_min_over_t", pt.lambda_min_over_t}});
    return json{{"history", hist},
                {"lambda_min_over_t", rep.lambda_min_over_t},
                {"rel_variation", rep.rel_variation},
                {"persistent", rep.persistent}};
}

inline json to_json(const EpochLog& e) {
    return json{{"epoch", e.epoch},
                {"t_start", e.t_start},
                {"arx_beta", e.arx_beta},
                {"m_bound", e.m_bound},
                {"beta_A", e.beta_A},
                {"beta_B", e.beta_B},
                {"beta_C", e.beta_C},
                {"beta_L", e.beta_L},
                {"J_tilde", e.J_tilde},
                {"feasible_fraction", e.feasible_fraction},
                {"degraded", e.degraded},
                {"truth_contained", e.truth_contained},
                {"sigma_n_hankel", e.sigma_n_hankel},
                {"well_separated", e.well_separated}};
}

inline json to_json(const AgentDiagnostics& d) {
    json epochs = json::array();
    for (const auto& e : d.epochs) epochs.push_back(to_json(e));
    json errs = json::array();
    for (const auto& pt : d.m_error_history)
        errs.push_back({{"t", pt.t}, {"error", pt.value}});
    return json{{"J_star", d.J_star},
                {"H", d.H},
                {"y_guard", d.y_guard},
                {"xhat_guard", d.xhat_guard},
                {"max_y_adaptive", d.max_y_adaptive},
                {"max_xhat_adaptive", d.max_xhat_adaptive},
                {"guards_respected", d.guards_respected},
                {"epochs", epochs},
                {"warmup_excitation", to_json(d.warmup_excitation)},
                {"adaptive_excitation", to_json(d.adaptive_excitation)},
                {"m_error_history", errs},
                {"final_regret", d.final_regret}};
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

struct CellResult {
    AgentMode mode = AgentMode::LqgOpt;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    AgentResult result;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

inline double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline std::uint64_t fnv_hash(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    return h;
}

/// Run every (agent, seed) cell of a scenario, write per-run CSV traces and
/// diagnostics, the scenario aggregate, and a manifest. Per-run failures are
/// recorded and the scenario continues.
inline json run_scenario(const ScenarioConfig& cfg, const std::string& out_dir, int jobs = 0) {
    namespace fs = std::filesystem;
    validate_plant(cfg.plant);
    validate_weights(cfg.cost, cfg.plant.m(), cfg.plant.p());
    // The true plant itself must clear the admissibility screen.
    {
        const SteadyStateSolution ss = solve_steady_state(cfg.plant, cfg.cost);
        AdmissibilityConfig adm = cfg.agent.admissibility;
        adm.sigma_w = cfg.plant.sigma_w;
        adm.sigma_z = cfg.plant.sigma_z;
        const AdmissibilityReport rep =
            admissible(CandidateParams{cfg.plant.A, cfg.plant.B, cfg.plant.C, ss.L}, cfg.cost,
                       adm);
        if (!rep.ok) {
            std::string why;
            for (const auto& r : rep.reasons) why += r + "; ";
            throw ConfigError("true plant fails admissibility: " + why);
        }
    }

    fs::create_directories(out_dir);

    std::vector<CellResult> cells;
    for (AgentMode mode : cfg.agents)
        for (std::uint64_t seed : cfg.seeds) cells.push_back({mode, seed, false, "", {}});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            CellResult& cell = cells[i];
            try {
                cell.result = run_agent(cfg.plant, cfg.cost, cfg.agent, cell.seed, cell.mode,
                                        cfg.T);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    const int nthreads = jobs > 0 ? jobs
                                  : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // Per-run outputs.
    for (const auto& cell : cells) {
        const std::string base = std::string(agent_name(cell.mode)) + "_seed" +
                                 std::to_string(cell.seed);
        if (!cell.ok) continue;
        cell.result.trace.write_csv(out_dir + "/" + base + ".csv");
        json diag = to_json(cell.result.diag);
        diag["agent"] = agent_name(cell.mode);
        diag["seed"] = cell.seed;
        std::ofstream(out_dir + "/" + base + ".json") << diag.dump(2) << "\n";
    }

    // Shared checkpoint grid for paired comparison.
    const std::vector<long> grid =
        detail::geometric_marks(cfg.agent.T_w, cfg.T - 1, cfg.agent.checkpoints);

    json agents_json;
    double J_star = 0.0;
    for (AgentMode mode : cfg.agents) {
        std::vector<const CellResult*> runs;
        json failed = json::array();
        for (const auto& cell : cells)
            if (cell.mode == mode) {
                if (cell.ok)
                    runs.push_back(&cell);
                else
                    failed.push_back({{"seed", cell.seed}, {"error", cell.error}});
            }
        json a;
        a["failed_runs"] = failed;
        a["runs_ok"] = runs.size();
        if (!runs.empty()) {
            J_star = runs.front()->result.diag.J_star;
            json med = json::array(), lo = json::array(), hi = json::array();
            for (long mark : grid) {
                std::vector<double> vals;
                for (const auto* r : runs) {
                    const auto series = regret_series(r->result.trace, r->result.diag.J_star);
                    if (mark < static_cast<long>(series.size()))
                        vals.push_back(series[static_cast<std::size_t>(mark)]);
                }
                med.push_back(median_of(vals));
                lo.push_back(quantile_of(vals, 0.25));
                hi.push_back(quantile_of(vals, 0.75));
            }
            a["median_regret"] = med;
            a["regret_q25"] = lo;
            a["regret_q75"] = hi;

            std::vector<double> finals, slopes, est_slopes;
            long epochs_total = 0, epochs_contained = 0, epochs_degraded = 0;
            int warm_ok = 0, adaptive_ok = 0;
            bool guards_all = true;
            for (const auto* r : runs) {
                finals.push_back(r->result.diag.final_regret);
                try {
                    slopes.push_back(fit_regret_slope(r->result.trace, r->result.diag.J_star,
                                                      cfg.agent.T_w, cfg.T - 1)
                                         .slope);
                } catch (const InsufficientPoints&) {
                }
                for (const auto& e : r->result.diag.epochs) {
                    ++epochs_total;
                    if (e.truth_contained) ++epochs_contained;
                    if (e.degraded) ++epochs_degraded;
                }
                const auto& we = r->result.diag.warmup_excitation;
                const auto& ae = r->result.diag.adaptive_excitation;
                if (we.persistent && we.rel_variation < 0.2) ++warm_ok;
                if (ae.persistent && ae.rel_variation < 0.2) ++adaptive_ok;
                guards_all = guards_all && r->result.diag.guards_respected;
                const long lo_w = cfg.est_error_window_lo;
                const long hi_w = cfg.est_error_window_hi > 0 ? cfg.est_error_window_hi : cfg.T;
                std::vector<std::pair<double, double>> pts;
                for (const auto& pt : r->result.diag.m_error_history)
                    if (pt.t >= lo_w && pt.t <= hi_w && pt.value > 0.0)
                        pts.emplace_back(static_cast<double>(pt.t), pt.value);
                if (pts.size() >= 8) est_slopes.push_back(fit_power_law(pts).slope);
            }
            a["final_regret_median"] = median_of(finals);
            a["slope_median"] = median_of(slopes);
            a["slopes"] = slopes;
            a["containment_frequency"] =
                epochs_total > 0
                    ? static_cast<double>(epochs_contained) / static_cast<double>(epochs_total)
                    : 0.0;
            a["epochs_total"] = epochs_total;
            a["epochs_degraded"] = epochs_degraded;
            a["warmup_excitation_ok_fraction"] =
                static_cast<double>(warm_ok) / static_cast<double>(runs.size());
            a["adaptive_excitation_ok_fraction"] =
                static_cast<double>(adaptive_ok) / static_cast<double>(runs.size());
            a["guards_respected_all"] = guards_all;
            if (!est_slopes.empty()) a["est_error_slope_median"] = median_of(est_slopes);
        }
        agents_json[agent_name(mode)] = a;
    }

    json grid_json = json::array();
    for (long g : grid) grid_json.push_back(g);
    json aggregate{{"name", cfg.name},
                   {"J_star", J_star},
                   {"checkpoints", grid_json},
                   {"agents", agents_json}};
    std::ofstream(out_dir + "/aggregate.json") << aggregate.dump(2) << "\n";

    // Manifest: fully resolved configuration, so each run is self-describing.
    json manifest;
    manifest["version"] = kVersion;
    manifest["name"] = cfg.name;
    manifest["T"] = cfg.T;
    manifest["seeds"] = cfg.seeds;
    json agent_names = json::array();
    for (AgentMode mode : cfg.agents) agent_names.push_back(agent_name(mode));
    manifest["agents"] = agent_names;
    manifest["plant"] = {{"A", detail::matrix_to_json(cfg.plant.A)},
                         {"B", detail::matrix_to_json(cfg.plant.B)},
                         {"C", detail::matrix_to_json(cfg.plant.C)},
                         {"sigma_w", cfg.plant.sigma_w},
                         {"sigma_z", cfg.plant.sigma_z}};
    manifest["cost"] = {{"Q", detail::matrix_to_json(cfg.cost.Q)},
                        {"R", detail::matrix_to_json(cfg.cost.R)}};
    manifest["agent_config"] = {{"T_w", cfg.agent.T_w},
                                {"sigma_u", cfg.agent.sigma_u},
                                {"H", cfg.agent.H},
                                {"sysid_H", cfg.agent.sysid_H},
                                {"upsilon_bound", cfg.agent.upsilon_bound},
                                {"c_H", cfg.agent.c_H},
                                {"lambda", cfg.agent.lambda},
                                {"delta", cfg.agent.delta},
                                {"S", cfg.agent.S},
                                {"noise_norm", cfg.agent.noise_norm},
                                {"c_M", cfg.agent.c_M},
                                {"ofu_budget", cfg.agent.ofu.budget},
                                {"ofu_sweeps", cfg.agent.ofu.sweeps},
                                {"rho_max", cfg.agent.admissibility.rho_max},
                                {"upsilon_max", cfg.agent.admissibility.upsilon_max},
                                {"P_cap", cfg.agent.admissibility.P_cap},
                                {"K_cap", cfg.agent.admissibility.K_cap},
                                {"L_cap", cfg.agent.admissibility.L_cap},
                                {"sigma_c_floor", cfg.agent.admissibility.sigma_c_floor},
                                {"gcl_horizon", cfg.agent.admissibility.gcl_horizon},
                                {"c1", cfg.agent.confidence.c1},
                                {"c_B", cfg.agent.confidence.c_B},
                                {"c2", cfg.agent.confidence.c2},
                                {"c3", cfg.agent.confidence.c3},
                                {"guard_scale", cfg.agent.guard_scale},
                                {"divergence_guard", cfg.agent.divergence_guard},
                                {"checkpoints", cfg.agent.checkpoints}};
    manifest["config_hash"] = fnv_hash(manifest.dump());
    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";

    return aggregate;
}

}  // namespace lqgopt
