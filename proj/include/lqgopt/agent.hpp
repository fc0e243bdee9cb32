#pragma once

#include "lqgopt/arx.hpp"
#include "lqgopt/ofu.hpp"
#include "lqgopt/plant.hpp"

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace lqgopt {

struct AgentConfig {
    long T_w = 2000;             // warm-up length
    double sigma_u = 1.0;        // exploration input std
    long H = 0;                  // ARX truncation; 0 -> choose_H
    long sysid_H = 0;            // Hankel horizon; 0 -> min(H, 2n+3)
    double upsilon_bound = 0.9;  // decay bound used by the auto H rule
    double c_H = 1.0;
    double lambda = 1.0;
    double delta = 0.1;
    double S = 0.0;           // Frobenius bound on M; 0 -> 2 ||M_true||_F
    double noise_norm = 0.0;  // bound on ||C Sigma C' + sigma_z^2 I||; 0 -> true value
    double c_M = 0.0;         // rate-form bound constant: ||Mhat - M|| <= c_M / sqrt(t)
                              // (the estimation-theorem decay shape with a calibrated
                              // problem constant); 0 disables the blend
    OfuOptions ofu;
    AdmissibilityConfig admissibility;
    ConfidenceConstants confidence;
    double guard_scale = 50.0;  // guards default to scale x oracle steady-state RMS
    double y_guard = 0.0;       // 0 -> auto
    double xhat_guard = 0.0;    // 0 -> auto
    double divergence_guard = 1e6;
    int checkpoints = 32;
    double excitation_floor = 1e-8;
};

enum class AgentMode {
    LqgOpt,                // optimistic model each epoch
    CertaintyEquivalence,  // center estimate each epoch, no optimism
    NonAdaptiveCommit,     // single estimate after warm-up, committed forever
    Oracle,                // true optimal controller throughout
};

inline const char* agent_name(AgentMode mode) {
    switch (mode) {
        case AgentMode::LqgOpt: return "lqgopt";
        case AgentMode::CertaintyEquivalence: return "ce";
        case AgentMode::NonAdaptiveCommit: return "nonadaptive";
        case AgentMode::Oracle: return "oracle";
    }
    return "unknown";
}

struct EpochLog {
    int epoch = 0;
    long t_start = 0;
    double arx_beta = 0.0;
    double m_bound = 0.0;
    double beta_A = 0.0, beta_B = 0.0, beta_C = 0.0, beta_L = 0.0;
    double J_tilde = 0.0;
    double feasible_fraction = 0.0;
    bool degraded = false;
    bool truth_contained = false;
    double sigma_n_hankel = 0.0;
    bool well_separated = false;  // sigma_n(N) >= 2 * expected Hankel perturbation
};

struct TimedValue {
    long t = 0;
    double value = 0.0;
};

struct AgentDiagnostics {
    double J_star = 0.0;
    long H = 0;
    double y_guard = 0.0;
    double xhat_guard = 0.0;
    double max_y_adaptive = 0.0;
    double max_xhat_adaptive = 0.0;
    bool guards_respected = true;
    std::vector<EpochLog> epochs;
    ExcitationReport warmup_excitation;
    ExcitationReport adaptive_excitation;
    std::vector<TimedValue> m_error_history;  // (t, ||Mhat_t - M||)
    double final_regret = 0.0;
};

struct AgentResult {
    RunTrace trace;
    AgentDiagnostics diag;
};

/// One mismatched-filter control step with the optimistic parameters:
///   xhat_{t|t} = (I - L C) xhat_{t|t-1} + L y_t,  u_t = -K xhat_{t|t},
///   xhat_{t+1|t} = (A - B K) xhat_{t|t}.
/// Returns (u_t, next predicted state); the filtered state is recoverable as
/// -K^+ u but callers needing it should use the pieces directly.
struct FilterStep {
    Vec u;
    Vec x_filt;
    Vec x_pred_next;
};

inline FilterStep filter_step(const CandidateParams& model, const Mat& K,
                              const Vec& x_hat_pred, const Vec& y) {
    FilterStep out;
    out.x_filt = x_hat_pred + model.L * (y - model.C * x_hat_pred);
    if (!out.x_filt.allFinite()) throw NonFiniteState("filter state left the finite range");
    out.u = -K * out.x_filt;
    out.x_pred_next = model.A * out.x_filt + model.B * out.u;
    return out;
}

namespace detail {

inline std::vector<long> geometric_marks(long lo, long hi, int count) {
    std::vector<long> marks;
    if (hi < lo || count <= 0) return marks;
    const double llo = std::log(std::max<long>(lo, 1));
    const double lhi = std::log(std::max<long>(hi, 1));
    for (int i = 0; i < count; ++i) {
        const double f = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        const long mark = static_cast<long>(std::llround(std::exp(llo + f * (lhi - llo))));
        if (marks.empty() || mark > marks.back()) marks.push_back(mark);
    }
    return marks;
}

inline std::vector<long> linear_marks(long lo, long hi, int count) {
    std::vector<long> marks;
    if (hi < lo || count <= 0) return marks;
    for (int i = 0; i < count; ++i) {
        const double f = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        const long mark = lo + static_cast<long>(std::llround(f * static_cast<double>(hi - lo)));
        if (marks.empty() || mark > marks.back()) marks.push_back(mark);
    }
    return marks;
}

}  // namespace detail

/// Standalone warm-up: Gaussian excitation for T_w steps plus the closing
/// observation, yielding the regressor dataset through t = T_w.
struct WarmupResult {
    RegressorDataset dataset;
    std::vector<Vec> ys;
    std::vector<Vec> us;
};

inline WarmupResult warmup(const LinearSystem& sys, const CostWeights& weights,
                           const AgentConfig& cfg, std::uint64_t seed, long H) {
    Plant plant(sys, weights, seed, cfg.divergence_guard);
    GaussianStream explore(seed, "agent/explore");
    WarmupResult out{RegressorDataset((sys.m() + sys.p()) * H, sys.m(), cfg.lambda), {}, {}};
    for (long t = 0; t < cfg.T_w; ++t) {
        const Vec y = plant.observe();
        out.ys.push_back(y);
        if (t >= H) out.dataset.add(build_regressor(out.ys, out.us, t, H), y);
        const Vec u = explore.vector(sys.p(), cfg.sigma_u);
        out.us.push_back(u);
        plant.apply(u);
    }
    const Vec y_final = plant.observe();  // completes the row with target y_{T_w}
    out.ys.push_back(y_final);
    out.dataset.add(build_regressor(out.ys, out.us, cfg.T_w, H), y_final);
    return out;
}

/// Cumulative regret per step against the optimal average cost.
inline std::vector<double> regret_series(const RunTrace& trace, double J_star) {
    std::vector<double> out;
    out.reserve(trace.rows.size());
    for (const auto& r : trace.rows)
        out.push_back(r.cum_cost - static_cast<double>(r.t + 1) * J_star);
    return out;
}

struct SlopeFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double shift = 0.0;  // applied to make the series positive, 0 if unneeded
    int points = 0;
};

/// Least-squares slope of log(value) vs log(t).
inline SlopeFit fit_power_law(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 8) throw InsufficientPoints("need at least 8 checkpoints for a slope fit");
    SlopeFit fit;
    fit.points = static_cast<int>(pts.size());
    double min_v = pts.front().second;
    for (const auto& [t, v] : pts) min_v = std::min(min_v, v);
    if (min_v <= 0.0) fit.shift = -min_v + 1.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [t, v] : pts) {
        const double x = std::log(t);
        const double y = std::log(v + fit.shift);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double nn = static_cast<double>(pts.size());
    const double denom = sxx - sx * sx / nn;
    fit.slope = (sxy - sx * sy / nn) / denom;
    const double intercept = (sy - fit.slope * sx) / nn;
    double rss = 0.0;
    for (const auto& [t, v] : pts) {
        const double r = std::log(v + fit.shift) - intercept - fit.slope * std::log(t);
        rss += r * r;
    }
    fit.stderr_slope = std::sqrt(rss / std::max(1.0, nn - 2.0) / denom);
    return fit;
}

/// Slope of cumulative regret on geometric checkpoints in [t_lo, t_hi].
inline SlopeFit fit_regret_slope(const RunTrace& trace, double J_star, long t_lo, long t_hi,
                                 int checkpoints = 32) {
    const std::vector<double> series = regret_series(trace, J_star);
    t_hi = std::min<long>(t_hi, static_cast<long>(series.size()) - 1);
    std::vector<std::pair<double, double>> pts;
    for (long mark : detail::geometric_marks(std::max<long>(t_lo, 1), t_hi, checkpoints))
        pts.emplace_back(static_cast<double>(mark), series[static_cast<std::size_t>(mark)]);
    return fit_power_law(pts);
}

struct RegretSummary {
    double total = 0.0;
    SlopeFit adaptive_slope;
};

inline RegretSummary regret(const RunTrace& trace, double J_star, long T_w) {
    RegretSummary out;
    const std::vector<double> series = regret_series(trace, J_star);
    out.total = series.empty() ? 0.0 : series.back();
    out.adaptive_slope =
        fit_regret_slope(trace, J_star, T_w, static_cast<long>(series.size()) - 1);
    return out;
}

/// Full adaptive-control run. The ground-truth system is used by the
/// simulator and the diagnostics; the controller side sees only the data,
/// the configured bounds, and the confidence machinery.
inline AgentResult run_agent(const LinearSystem& sys, const CostWeights& weights,
                             const AgentConfig& cfg, std::uint64_t seed, AgentMode mode,
                             long T) {
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();

    const SteadyStateSolution truth = solve_steady_state(sys, weights);
    const long H = cfg.H > 0 ? cfg.H
                             : choose_H(T, cfg.upsilon_bound, cfg.c_H, m, cfg.lambda, n);
    if (cfg.T_w < H + 1) throw ConfigError("warm-up must satisfy T_w >= H + 1");
    const MarkovParams M_true = markov_params(sys, truth, H);
    const double S = cfg.S > 0.0 ? cfg.S : 2.0 * M_true.M.norm();
    const double noise_norm =
        cfg.noise_norm > 0.0
            ? cfg.noise_norm
            : spectral_norm(sys.C * truth.Sigma * sys.C.transpose() +
                            sys.sigma_z * sys.sigma_z * Mat::Identity(m, m));

    AgentDiagnostics diag;
    diag.J_star = truth.J_star;
    diag.H = H;
    {
        const Mat Scov = stationary_joint_covariance(sys, truth.K, truth.L);
        const double y_rms = std::sqrt((sys.C * Scov.topLeftCorner(n, n) * sys.C.transpose())
                                           .trace() +
                                       sys.sigma_z * sys.sigma_z * static_cast<double>(m));
        const double xhat_rms = std::sqrt(Scov.bottomRightCorner(n, n).trace());
        diag.y_guard = cfg.y_guard > 0.0 ? cfg.y_guard : cfg.guard_scale * y_rms;
        diag.xhat_guard = cfg.xhat_guard > 0.0 ? cfg.xhat_guard : cfg.guard_scale * xhat_rms;
    }

    AdmissibilityConfig adm = cfg.admissibility;
    adm.sigma_w = sys.sigma_w;
    adm.sigma_z = sys.sigma_z;

    Plant plant(sys, weights, seed, cfg.divergence_guard);
    GaussianStream explore(seed, "agent/explore");

    RunTrace trace;
    trace.seed = seed;
    trace.rows.reserve(static_cast<std::size_t>(T));

    if (mode == AgentMode::Oracle) {
        // True optimal controller throughout; no estimation machinery.
        Vec x_pred = Vec::Zero(n);
        const Mat Acl = sys.A - sys.B * truth.K;
        double cum = 0.0;
        for (long t = 0; t < T; ++t) {
            const Vec y = plant.observe();
            const Vec x_filt = x_pred + truth.L * (y - sys.C * x_pred);
            const Vec u = -truth.K * x_filt;
            x_pred = Acl * x_filt;
            const auto step = plant.apply(u);
            cum += step.cost;
            trace.rows.push_back({t, 0, step.cost, cum, y.norm(), u.norm(), x_filt.norm()});
        }
        diag.final_regret = cum - static_cast<double>(T) * truth.J_star;
        return {std::move(trace), std::move(diag)};
    }

    // SysId reads a short Hankel: past 2n+1 blocks the extra block rows carry
    // exponentially small signal but full-size noise, drowning sigma_n.
    const long H_s = cfg.sysid_H > 0 ? std::min(cfg.sysid_H, H)
                                     : std::min<long>(H, 2 * n + 3);
    const auto [d1, d2] = default_hankel_split(H_s, n);
    std::optional<SystemEstimate> truth_ref;
    try {
        truth_ref = balanced_truth(sys, truth, H_s, d1, d2);
    } catch (const std::exception&) {
        // containment tracking unavailable; everything else proceeds
    }

    std::vector<Vec> ys, us;
    ys.reserve(static_cast<std::size_t>(T) + 1);
    us.reserve(static_cast<std::size_t>(T));
    RegressorDataset dataset((m + p) * H, m, cfg.lambda, /*keep_rows=*/false);

    ExcitationMonitor warm_monitor(cfg.excitation_floor);
    ExcitationMonitor adaptive_monitor(cfg.excitation_floor);
    const std::vector<long> warm_marks = detail::linear_marks(H + 1, cfg.T_w, cfg.checkpoints);
    const std::vector<long> adaptive_marks =
        detail::linear_marks(cfg.T_w + 1, T - 1, cfg.checkpoints);
    std::size_t warm_next = 0, adaptive_next = 0, err_next = 0;
    const std::vector<long> err_marks = detail::geometric_marks(H + 1, T - 1, cfg.checkpoints);

    std::optional<CandidateParams> model;
    Mat K_cur;
    Vec x_pred = Vec::Zero(n);
    int epoch = -1;
    long next_boundary = cfg.T_w;
    double cum = 0.0;

    for (long t = 0; t < T; ++t) {
        const Vec y = plant.observe();
        ys.push_back(y);
        if (t >= H) dataset.add(build_regressor(ys, us, t, H), y);

        if (warm_next < warm_marks.size() && t == warm_marks[warm_next]) {
            warm_monitor.checkpoint(t, dataset);
            ++warm_next;
        }
        if (adaptive_next < adaptive_marks.size() && t == adaptive_marks[adaptive_next]) {
            adaptive_monitor.checkpoint(t, dataset);
            ++adaptive_next;
        }
        if (err_next < err_marks.size() && t == err_marks[err_next]) {
            if (dataset.rows() > 0)
                diag.m_error_history.push_back(
                    {t, spectral_norm(dataset.estimate_M() - M_true.M)});
            ++err_next;
        }

        Vec u;
        double xhat_norm_row = 0.0;
        if (t < cfg.T_w) {
            u = explore.vector(p, cfg.sigma_u);
        } else {
            if (t == next_boundary) {
                ++epoch;
                next_boundary *= 2;
                const bool reestimate =
                    mode != AgentMode::NonAdaptiveCommit || epoch == 0;
                if (reestimate) {
                    EpochLog log;
                    log.epoch = epoch;
                    log.t_start = t;
                    try {
                        const Mat Mhat = dataset.estimate_M();
                        log.arx_beta =
                            confidence_beta(dataset, cfg.delta, S, noise_norm, H, t, T);
                        log.m_bound =
                            m_two_norm_bound_sub(dataset, log.arx_beta, m, p, H, H_s);
                        if (cfg.c_M > 0.0)
                            log.m_bound = std::min(
                                log.m_bound, cfg.c_M / std::sqrt(static_cast<double>(t)));
                        const MarkovParams mp{Mhat, H, m, p};
                        const SystemEstimate est =
                            extract(hankelize(truncate_blocks(mp, H_s), d1, d2), n);
                        const ParamConfidence pc =
                            param_confidence(log.m_bound, est, n, H_s, cfg.confidence);
                        log.beta_A = pc.beta_A;
                        log.beta_B = pc.beta_B;
                        log.beta_C = pc.beta_C;
                        log.beta_L = pc.beta_L;
                        log.sigma_n_hankel = pc.hankel_sigma_n;
                        log.well_separated =
                            pc.hankel_sigma_n >=
                            2.0 * 2.0 * std::sqrt(static_cast<double>(std::min(d1, d2))) *
                                log.m_bound;
                        if (truth_ref) {
                            const AlignedErrors ae = align_similarity(est, *truth_ref);
                            log.truth_contained = ae.err_A <= pc.beta_A &&
                                                  ae.err_B <= pc.beta_B &&
                                                  ae.err_C <= pc.beta_C &&
                                                  ae.err_L <= pc.beta_L;
                        }
                        adm.sigma_e = dataset.residual_covariance();
                        const ConfidenceSet set = make_confidence_set(est, pc, adm);
                        if (mode == AgentMode::LqgOpt) {
                            const OptimisticModel opt = find_optimistic(
                                set, weights, cfg.ofu,
                                seed * 1000003ull + static_cast<std::uint64_t>(epoch));
                            model = opt.params;
                            K_cur = opt.K;
                            log.J_tilde = opt.J_tilde;
                            log.feasible_fraction = opt.feasible_fraction;
                        } else {
                            const CandidateParams center{est.A_hat, est.B_hat, est.C_hat,
                                                         est.L_hat};
                            const AdmissibilityReport rep = admissible(center, weights, adm);
                            if (!rep.ok)
                                throw NoFeasibleCandidate("center estimate inadmissible");
                            model = center;
                            K_cur = rep.K;
                            log.J_tilde = rep.J;
                            log.feasible_fraction = 1.0;
                        }
                    } catch (const std::exception&) {
                        log.degraded = true;  // keep the previous controller, if any
                    }
                    diag.epochs.push_back(log);
                } else {
                    EpochLog log;
                    log.epoch = epoch;
                    log.t_start = t;
                    log.degraded = false;  // committed controller, by design
                    diag.epochs.push_back(log);
                }
            }
            if (model) {
                const FilterStep fs = filter_step(*model, K_cur, x_pred, y);
                u = fs.u;
                x_pred = fs.x_pred_next;
                xhat_norm_row = fs.x_filt.norm();
                diag.max_xhat_adaptive = std::max(diag.max_xhat_adaptive, xhat_norm_row);
            } else {
                u = explore.vector(p, cfg.sigma_u);  // degraded epoch 0 fallback
                xhat_norm_row = 0.0;
            }
            diag.max_y_adaptive = std::max(diag.max_y_adaptive, y.norm());
        }

        us.push_back(u);
        const auto step = plant.apply(u);
        cum += step.cost;
        trace.rows.push_back(
            {t, t < cfg.T_w ? -1 : epoch, step.cost, cum, y.norm(), u.norm(), xhat_norm_row});
    }

    diag.guards_respected =
        diag.max_y_adaptive <= diag.y_guard && diag.max_xhat_adaptive <= diag.xhat_guard;
    diag.warmup_excitation = warm_monitor.report();
    diag.adaptive_excitation = adaptive_monitor.report();
    diag.final_regret = cum - static_cast<double>(T) * truth.J_star;
    return {std::move(trace), std::move(diag)};
}

inline AgentResult run_lqgopt(const LinearSystem& sys, const CostWeights& weights,
                              const AgentConfig& cfg, std::uint64_t seed, long T) {
    return run_agent(sys, weights, cfg, seed, AgentMode::LqgOpt, T);
}

}  // namespace lqgopt
