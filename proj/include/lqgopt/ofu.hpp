#pragma once

#include "lqgopt/noise_evolution.hpp"
#include "lqgopt/random.hpp"
#include "lqgopt/sysid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lqgopt {

/// Candidate parameter tuple in the estimate's coordinates.
struct CandidateParams {
    Mat A;
    Mat B;
    Mat C;
    Mat L;
};

/// Structural caps defining the admissible model class, plus the knobs needed
/// to synthesize and score a candidate's controller.
struct AdmissibilityConfig {
    double rho_max = 0.99;      // cap on rho(A' - B' K(Theta'))
    double upsilon_max = 0.99;  // cap on rho(A' - A' L' C')
    double P_cap = 1e3;
    double K_cap = 1e3;
    double L_cap = 1e3;
    double sigma_c_floor = 1e-6;  // floor on sigma_min of the closed-loop noise map
    long gcl_horizon = 0;         // 0 -> 2n+1; kept small, the rank content saturates early
    double sigma_w = 1.0;         // noise scales of the closed-loop noise map
    double sigma_z = 1.0;
    Mat sigma_e;  // innovation covariance for candidate scoring; empty -> identity
    DareOptions dare;
};

/// Joint confidence region: spectral-norm balls around the SysId centers,
/// intersected with the admissible class.
struct ConfidenceSet {
    Mat A_hat;
    Mat B_hat;
    Mat C_hat;
    Mat L_hat;
    ParamConfidence radii;
    AdmissibilityConfig admissibility;

    Eigen::Index n() const { return A_hat.rows(); }
};

inline ConfidenceSet make_confidence_set(const SystemEstimate& est, const ParamConfidence& pc,
                                         const AdmissibilityConfig& adm) {
    return ConfidenceSet{est.A_hat, est.B_hat, est.C_hat, est.L_hat, pc, adm};
}

/// Best orthogonal change of coordinates taking the candidate onto the
/// estimate's chart, found from the linear (B, C, L) terms.
inline Mat chart_alignment(const CandidateParams& cand, const ConfidenceSet& set) {
    Mat G = cand.B * set.B_hat.transpose();
    G += cand.C.transpose() * set.C_hat;
    G += cand.L * set.L_hat.transpose();
    Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

/// Membership test for the joint ball (closed set), checked in the estimate's
/// own chart and, failing that, after the best orthogonal re-coordinatization
/// of the candidate. The latter makes membership invariant under orthogonal
/// similarity (e.g. the n=1 sign flip).
inline bool contains(const CandidateParams& cand, const ConfidenceSet& set) {
    auto within = [&](const Mat& T) {
        return spectral_norm(set.A_hat - T.transpose() * cand.A * T) <= set.radii.beta_A &&
               spectral_norm(set.B_hat - T.transpose() * cand.B) <= set.radii.beta_B &&
               spectral_norm(set.C_hat - cand.C * T) <= set.radii.beta_C &&
               spectral_norm(set.L_hat - T.transpose() * cand.L) <= set.radii.beta_L;
    };
    return within(Mat::Identity(set.n(), set.n())) || within(chart_alignment(cand, set));
}

struct AdmissibilityReport {
    bool ok = false;
    std::vector<std::string> reasons;
    // filled when synthesis succeeds
    Mat P;
    Mat K;
    double J = 0.0;
};

/// Screen a candidate against the admissible class: stability, minimality,
/// contractivity of both closed loops, norm caps and the excitation floor.
/// DARE failures become reasons rather than exceptions.
inline AdmissibilityReport admissible(const CandidateParams& cand, const CostWeights& w,
                                      const AdmissibilityConfig& cfg) {
    AdmissibilityReport rep;
    const Eigen::Index n = cand.A.rows();
    const double rho = spectral_radius(cand.A);
    if (rho >= 1.0) rep.reasons.push_back("spectral radius " + std::to_string(rho) + " >= 1");

    const StructuralReport sr = structural_checks(cand.A, cand.B, cand.C);
    if (!sr.controllable) rep.reasons.push_back("(A,B) not controllable");
    if (!sr.observable) rep.reasons.push_back("(A,C) not observable");
    const Mat F = cand.A * cand.L;
    if (numerical_rank(controllability_matrix(cand.A, F, n)) != n)
        rep.reasons.push_back("(A,F) not controllable");
    if (!rep.reasons.empty()) return rep;

    try {
        rep.P = solve_control_dare(cand.A, cand.B, cand.C, w.Q, w.R, cfg.dare);
        rep.K = optimal_gain(cand.A, cand.B, rep.P, w.R);
    } catch (const std::exception& e) {
        rep.reasons.push_back(std::string("controller synthesis failed: ") + e.what());
        return rep;
    }

    // Contractivity is checked on the spectral radius: the operator-norm
    // variant is coordinate-dependent and rejects comfortably stable loops
    // (any radius < 1 matrix is a contraction in some basis).
    const double feedback_rho = spectral_radius(cand.A - cand.B * rep.K);
    if (feedback_rho > cfg.rho_max)
        rep.reasons.push_back("rho(A - BK) = " + std::to_string(feedback_rho) +
                              " exceeds rho cap");
    const double filter_rho = spectral_radius(cand.A - cand.A * cand.L * cand.C);
    if (filter_rho > cfg.upsilon_max)
        rep.reasons.push_back("rho(A - ALC) = " + std::to_string(filter_rho) +
                              " exceeds upsilon cap");
    if (spectral_norm(rep.P) > cfg.P_cap) rep.reasons.push_back("||P|| exceeds cap");
    if (spectral_norm(rep.K) > cfg.K_cap) rep.reasons.push_back("||K|| exceeds cap");
    if (spectral_norm(cand.L) > cfg.L_cap) rep.reasons.push_back("||L|| exceeds cap");

    const LinearSystem model{cand.A, cand.B, cand.C, cfg.sigma_w, cfg.sigma_z};
    const long Hg = cfg.gcl_horizon > 0 ? cfg.gcl_horizon : 2 * n + 1;
    const NoiseEvolution gcl = build_G_cl(model, rep.K, cand.L, Hg);
    if (gcl.sigma_min < cfg.sigma_c_floor)
        rep.reasons.push_back("sigma_min(Gcl) = " + std::to_string(gcl.sigma_min) +
                              " below floor");

    if (!rep.reasons.empty()) return rep;

    const Eigen::Index m = cand.C.rows();
    const Mat Sigma_e = cfg.sigma_e.size() > 0 ? cfg.sigma_e : Mat(Mat::Identity(m, m));
    try {
        rep.J = detail::predictor_cost_with_gains(cand.A, cand.B, cand.C, cand.L, rep.K,
                                                  Sigma_e, w);
    } catch (const std::exception& e) {
        rep.reasons.push_back(std::string("cost evaluation failed: ") + e.what());
        return rep;
    }
    rep.ok = true;
    return rep;
}

struct OfuOptions {
    long budget = 256;  // random candidates on top of the center
    int sweeps = 16;    // coordinate-descent refinement passes
    double tolerance = 1e-8;
};

/// Selected optimistic model with its synthesized controller.
struct OptimisticModel {
    CandidateParams params;
    Mat P;
    Mat K;
    double J_tilde = 0.0;
    long candidate_index = 0;
    long evaluations = 0;
    double feasible_fraction = 0.0;
};

namespace detail {

/// Uniform-radius perturbation in the spectral-norm ball: Gaussian direction
/// scaled to norm radius * u with u ~ U(0,1).
inline Mat ball_perturbation(GaussianStream& rng, Eigen::Index rows, Eigen::Index cols,
                             double radius) {
    if (radius <= 0.0) return Mat::Zero(rows, cols);
    Mat G = rng.matrix(rows, cols);
    const double nrm = spectral_norm(G);
    if (nrm <= 0.0) return Mat::Zero(rows, cols);
    return G * (radius * rng.uniform01() / nrm);
}

inline Mat clip_to_ball(const Mat& center, const Mat& value, double radius) {
    Mat delta = value - center;
    const double nrm = spectral_norm(delta);
    // shrink strictly inside so a re-evaluated norm cannot round past the radius
    if (nrm > radius) delta *= (radius > 0.0 ? (1.0 - 1e-9) * radius / nrm : 0.0);
    return center + delta;
}

}  // namespace detail

/// Projected random search for the lowest-cost admissible model in the set,
/// followed by a coordinate-descent refinement with shrinking steps around the
/// incumbent. Deterministic given (set, seed, options); ties break toward the
/// lowest candidate index.
inline OptimisticModel find_optimistic(const ConfidenceSet& set, const CostWeights& w,
                                       const OfuOptions& opts, std::uint64_t seed) {
    GaussianStream rng(seed, "ofu/search");
    const Eigen::Index n = set.A_hat.rows();
    const Eigen::Index m = set.C_hat.rows();
    const Eigen::Index p = set.B_hat.cols();

    std::optional<OptimisticModel> best;
    long evals = 0;
    long feasible = 0;

    auto consider = [&](const CandidateParams& cand, long index) -> bool {
        const AdmissibilityReport rep = admissible(cand, w, set.admissibility);
        ++evals;
        if (!rep.ok) return false;
        ++feasible;
        if (!best || rep.J < best->J_tilde) {
            best = OptimisticModel{cand, rep.P, rep.K, rep.J, index, 0, 0.0};
            return true;
        }
        return false;
    };

    consider(CandidateParams{set.A_hat, set.B_hat, set.C_hat, set.L_hat}, 0);
    for (long i = 1; i <= opts.budget; ++i) {
        CandidateParams cand;
        cand.A = set.A_hat + detail::ball_perturbation(rng, n, n, set.radii.beta_A);
        cand.B = set.B_hat + detail::ball_perturbation(rng, n, p, set.radii.beta_B);
        cand.C = set.C_hat + detail::ball_perturbation(rng, m, n, set.radii.beta_C);
        cand.L = set.L_hat + detail::ball_perturbation(rng, n, m, set.radii.beta_L);
        consider(cand, i);
    }

    if (!best) throw NoFeasibleCandidate("no admissible model found within the budget");

    // Coordinate descent around the incumbent, projecting back into the balls.
    double step = 0.5;
    for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
        for (int coord = 0; coord < 4; ++coord) {
            CandidateParams cand = best->params;
            switch (coord) {
                case 0:
                    cand.A = detail::clip_to_ball(
                        set.A_hat,
                        cand.A + step * detail::ball_perturbation(rng, n, n, set.radii.beta_A),
                        set.radii.beta_A);
                    break;
                case 1:
                    cand.B = detail::clip_to_ball(
                        set.B_hat,
                        cand.B + step * detail::ball_perturbation(rng, n, p, set.radii.beta_B),
                        set.radii.beta_B);
                    break;
                case 2:
                    cand.C = detail::clip_to_ball(
                        set.C_hat,
                        cand.C + step * detail::ball_perturbation(rng, m, n, set.radii.beta_C),
                        set.radii.beta_C);
                    break;
                case 3:
                    cand.L = detail::clip_to_ball(
                        set.L_hat,
                        cand.L + step * detail::ball_perturbation(rng, n, m, set.radii.beta_L),
                        set.radii.beta_L);
                    break;
            }
            consider(cand, opts.budget + 1 + sweep * 4 + coord);
        }
        step *= 0.75;
    }

    best->evaluations = evals;
    best->feasible_fraction = static_cast<double>(feasible) / static_cast<double>(evals);
    return *best;
}

}  // namespace lqgopt
