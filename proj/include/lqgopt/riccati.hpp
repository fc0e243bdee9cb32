#pragma once

#include "lqgopt/linear_system.hpp"
#include "lqgopt/types.hpp"

#include <cmath>
#include <string>

namespace lqgopt {

struct DareOptions {
    double tol = 1e-10;      // Frobenius residual at the fixed point
    long max_iter = 100000;  // fixed-point iteration cap
};

namespace detail {

inline Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

inline void check_psd(const Mat& M, double tol, const char* what) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
        throw IndefiniteResult(std::string(what) + " has eigenvalue below -tol");
}

}  // namespace detail

/// One application of the control Riccati map
///   P -> A'PA + C'QC - A'PB (R + B'PB)^{-1} B'PA.
inline Mat control_dare_map(const Mat& A, const Mat& B, const Mat& C, const Mat& Q,
                            const Mat& R, const Mat& P) {
    const Mat BtP = B.transpose() * P;
    const Mat inner = R + BtP * B;
    const Mat gain = inner.ldlt().solve(BtP * A);  // (R + B'PB)^{-1} B'PA
    return detail::symmetrize(A.transpose() * P * A + C.transpose() * Q * C -
                              (BtP * A).transpose() * gain);
}

/// Fixed-point solve of the output-cost control DARE starting from P = 0.
/// Iterates are symmetrized each step to suppress drift.
inline Mat solve_control_dare(const Mat& A, const Mat& B, const Mat& C, const Mat& Q,
                              const Mat& R, const DareOptions& opts = {}) {
    const Eigen::Index n = A.rows();
    Mat P = Mat::Zero(n, n);
    for (long it = 0; it < opts.max_iter; ++it) {
        const Mat Pn = control_dare_map(A, B, C, Q, R, P);
        const double residual = (Pn - P).norm();
        P = Pn;
        if (residual <= opts.tol) {
            detail::check_psd(P, opts.tol, "control DARE solution");
            return P;
        }
    }
    throw NonConvergence("control DARE did not converge within max_iter");
}

/// K = (R + B'PB)^{-1} B'PA. Rejects a numerically singular inner matrix.
inline Mat optimal_gain(const Mat& A, const Mat& B, const Mat& P, const Mat& R) {
    const Mat inner = R + B.transpose() * P * B;
    Eigen::JacobiSVD<Mat> svd(inner);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > 1e12)
        throw SingularInnerMatrix("R + B'PB is numerically singular");
    return inner.ldlt().solve(B.transpose() * P * A);
}

/// One application of the filter Riccati map
///   S -> A S A' - A S C' (C S C' + sigma_z^2 I)^{-1} C S A' + sigma_w^2 I.
inline Mat filter_dare_map(const Mat& A, const Mat& C, double sigma_w, double sigma_z,
                           const Mat& S) {
    const Eigen::Index n = A.rows(), m = C.rows();
    const Mat CS = C * S;
    const Mat inner = CS * C.transpose() + sigma_z * sigma_z * Mat::Identity(m, m);
    const Mat gain = inner.ldlt().solve(CS * A.transpose());  // (.)^{-1} C S A'
    return detail::symmetrize(A * S * A.transpose() - (CS * A.transpose()).transpose() * gain +
                              sigma_w * sigma_w * Mat::Identity(n, n));
}

inline Mat solve_filter_dare(const Mat& A, const Mat& C, double sigma_w, double sigma_z,
                             const DareOptions& opts = {}) {
    const Eigen::Index n = A.rows();
    Mat S = Mat::Zero(n, n);
    for (long it = 0; it < opts.max_iter; ++it) {
        const Mat Sn = filter_dare_map(A, C, sigma_w, sigma_z, S);
        const double residual = (Sn - S).norm();
        S = Sn;
        if (residual <= opts.tol) {
            detail::check_psd(S, opts.tol, "filter DARE solution");
            return S;
        }
    }
    throw NonConvergence("filter DARE did not converge within max_iter");
}

/// L = Sigma C' (C Sigma C' + sigma_z^2 I)^{-1}.
inline Mat kalman_gain(const Mat& Sigma, const Mat& C, double sigma_z) {
    const Eigen::Index m = C.rows();
    const Mat inner = C * Sigma * C.transpose() + sigma_z * sigma_z * Mat::Identity(m, m);
    // Solve X inner = Sigma C'  =>  inner' X' = C Sigma'
    return inner.ldlt().solve(C * Sigma.transpose()).transpose();
}

/// Predictor form: F = A L, Abar = A - F C.
inline std::pair<Mat, Mat> predictor_form(const Mat& A, const Mat& L, const Mat& C) {
    const Mat F = A * L;
    return {A - F * C, F};
}

/// Everything the optimal LQG controller of a system needs, all in one solve.
struct SteadyStateSolution {
    Mat Sigma;   // steady-state a-priori filter covariance
    Mat L;       // Kalman gain
    Mat F;       // predictor gain, A L
    Mat A_bar;   // A - F C
    Mat P;       // control DARE solution
    Mat K;       // optimal feedback gain
    double J_star = 0.0;  // optimal average cost
};

}  // namespace lqgopt
