#pragma once

#include "lqgopt/riccati.hpp"

namespace lqgopt {

/// Solve X = A X A' + Q (spectral radius of A must be < 1) by doubling:
///   X <- X + A X A',  A <- A^2
/// converges quadratically for stable A.
inline Mat solve_discrete_lyapunov(const Mat& A, const Mat& Q, double tol = 1e-13,
                                   int max_doublings = 200) {
    Mat X = detail::symmetrize(Q);
    Mat Ak = A;
    for (int it = 0; it < max_doublings; ++it) {
        const Mat incr = Ak * X * Ak.transpose();
        X = detail::symmetrize(X + incr);
        if (incr.norm() <= tol * (1.0 + X.norm())) return X;
        Ak = Ak * Ak;
    }
    throw NonConvergence("discrete Lyapunov iteration did not converge (unstable A?)");
}

/// Dynamics of the joint (plant state, filtered estimate) under output feedback
/// u = -K xhat_{t|t} with filter gain L run against the true plant:
///   [x; xhat]+ = G2 [x; xhat] + G3 [w; z+].
inline Mat closed_loop_dynamics(const Mat& A, const Mat& B, const Mat& C, const Mat& K,
                                const Mat& L) {
    const Eigen::Index n = A.rows();
    Mat G2(2 * n, 2 * n);
    const Mat LC = L * C;
    G2.topLeftCorner(n, n) = A;
    G2.topRightCorner(n, n) = -B * K;
    G2.bottomLeftCorner(n, n) = LC * A;
    G2.bottomRightCorner(n, n) =
        (Mat::Identity(n, n) - LC) * (A - B * K) - LC * B * K;
    return G2;
}

/// Noise injection matrix paired with closed_loop_dynamics: columns act on [w; z].
inline Mat closed_loop_noise_map(const Mat& A, const Mat& C, const Mat& L) {
    const Eigen::Index n = A.rows(), m = C.rows();
    Mat G3 = Mat::Zero(2 * n, n + m);
    G3.topLeftCorner(n, n) = Mat::Identity(n, n);
    G3.bottomLeftCorner(n, n) = L * C;
    G3.bottomRightCorner(n, m) = L;
    return G3;
}

/// Stationary covariance of the joint (plant state, filtered estimate) pair
/// under output feedback (K, L). Throws UnstableClosedLoop when the augmented
/// spectral radius is not strictly inside the unit circle.
inline Mat stationary_joint_covariance(const LinearSystem& sys, const Mat& K, const Mat& L) {
    const Eigen::Index n = sys.n(), m = sys.m();
    const Mat G2 = closed_loop_dynamics(sys.A, sys.B, sys.C, K, L);
    if (spectral_radius(G2) >= 1.0 - 1e-9)
        throw UnstableClosedLoop("augmented closed loop has spectral radius >= 1");
    const Mat G3 = closed_loop_noise_map(sys.A, sys.C, L);
    Mat Swz = Mat::Zero(n + m, n + m);
    Swz.topLeftCorner(n, n) = sys.sigma_w * sys.sigma_w * Mat::Identity(n, n);
    Swz.bottomRightCorner(m, m) = sys.sigma_z * sys.sigma_z * Mat::Identity(m, m);
    return solve_discrete_lyapunov(G2, G3 * Swz * G3.transpose());
}

/// Average per-step cost of running gains (K, L) on the plant:
///   J = tr(Q (C Sx C' + sigma_z^2 I)) + tr(R K Sxhat K')
/// with (Sx, Sxhat) the diagonal blocks of the stationary joint covariance.
/// With the optimal gains of the same plant this equals J*.
inline double steady_state_cost(const LinearSystem& sys, const Mat& K, const Mat& L,
                                const CostWeights& w) {
    const Eigen::Index n = sys.n(), m = sys.m();
    const Mat S = stationary_joint_covariance(sys, K, L);
    const Mat Sx = S.topLeftCorner(n, n);
    const Mat Sxhat = S.bottomRightCorner(n, n);
    const Mat Yc = sys.C * Sx * sys.C.transpose() +
                   sys.sigma_z * sys.sigma_z * Mat::Identity(m, m);
    return (w.Q * Yc).trace() + (w.R * K * Sxhat * K.transpose()).trace();
}

namespace detail {

inline double predictor_cost_with_gains(const Mat& A, const Mat& B, const Mat& C,
                                        const Mat& L, const Mat& K, const Mat& Sigma_e,
                                        const CostWeights& w) {
    const Mat Acl = A - B * K;
    if (spectral_radius(Acl) >= 1.0 - 1e-9)
        throw UnstableClosedLoop("predictor-form closed loop has spectral radius >= 1");
    const Mat G = A * L - B * K * L;
    const Mat X = solve_discrete_lyapunov(Acl, G * Sigma_e * G.transpose());
    const Mat KL = K * L;
    return ((C.transpose() * w.Q * C + K.transpose() * w.R * K) * X).trace() +
           (w.Q * Sigma_e).trace() + (w.R * KL * Sigma_e * KL.transpose()).trace();
}

}  // namespace detail

/// Optimal average cost of a model given in predictor/innovations coordinates
/// (A, B, C, L) with innovation covariance Sigma_e. Every term is invariant
/// under invertible similarity transforms of the realization, so estimates
/// produced in balanced coordinates are scored consistently with the original
/// system:
///   u = -K xhat_{t|t} = -K(xhat_{t|t-1} + L e_t),
///   xhat+ = (A - BK) xhat + (AL - BKL) e,
///   J = tr((C'QC + K'RK) X) + tr(Q Sigma_e) + tr(R K L Sigma_e L' K')
/// with X the stationary covariance of the predicted state.
inline double predictor_form_cost(const Mat& A, const Mat& B, const Mat& C, const Mat& L,
                                  const Mat& Sigma_e, const CostWeights& w,
                                  const DareOptions& opts = {}) {
    const Mat P = solve_control_dare(A, B, C, w.Q, w.R, opts);
    const Mat K = optimal_gain(A, B, P, w.R);
    return detail::predictor_cost_with_gains(A, B, C, L, K, Sigma_e, w);
}

inline SteadyStateSolution solve_steady_state(const LinearSystem& sys, const CostWeights& w,
                                              const DareOptions& opts = {}) {
    SteadyStateSolution s;
    s.Sigma = solve_filter_dare(sys.A, sys.C, sys.sigma_w, sys.sigma_z, opts);
    s.L = kalman_gain(s.Sigma, sys.C, sys.sigma_z);
    std::tie(s.A_bar, s.F) = predictor_form(sys.A, s.L, sys.C);
    s.P = solve_control_dare(sys.A, sys.B, sys.C, w.Q, w.R, opts);
    s.K = optimal_gain(sys.A, sys.B, s.P, w.R);
    s.J_star = steady_state_cost(sys, s.K, s.L, w);
    return s;
}

}  // namespace lqgopt
