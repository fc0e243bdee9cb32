#pragma once

#include "lqgopt/types.hpp"

#include <cmath>

namespace lqgopt {

/// Discrete-time plant x+ = Ax + Bu + w, y = Cx + z with isotropic Gaussian
/// noise (covariances sigma_w^2 I and sigma_z^2 I).
struct LinearSystem {
    Mat A;  // n x n state transition
    Mat B;  // n x p input map
    Mat C;  // m x n observation map
    double sigma_w = 1.0;
    double sigma_z = 1.0;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index p() const { return B.cols(); }
    Eigen::Index m() const { return C.rows(); }
};

/// Quadratic cost c_t = y'Qy + u'Ru. Q PSD (m x m), R positive definite (p x p).
struct CostWeights {
    Mat Q;
    Mat R;
};

struct StructuralReport {
    bool controllable = false;
    bool observable = false;
    double rho = 0.0;  // spectral radius of A
};

inline double spectral_radius(const Mat& A) {
    return A.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_norm(const Mat& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Mat>(A).singularValues()(0);
}

/// Numerical rank with relative singular-value threshold 1e-10 * sigma_max.
inline Eigen::Index numerical_rank(const Mat& M, double rel_tol = 1e-10) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& sv = svd.singularValues();
    const double cut = rel_tol * sv(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++r;
    return r;
}

/// [B AB ... A^{n-1}B], full row rank iff (A,B) controllable.
inline Mat controllability_matrix(const Mat& A, const Mat& B, Eigen::Index blocks) {
    const Eigen::Index n = A.rows(), p = B.cols();
    Mat ctrb(n, p * blocks);
    Mat AkB = B;
    for (Eigen::Index k = 0; k < blocks; ++k) {
        ctrb.middleCols(k * p, p) = AkB;
        AkB = A * AkB;
    }
    return ctrb;
}

/// [C; CA; ...; CA^{n-1}], full column rank iff (A,C) observable.
inline Mat observability_matrix(const Mat& A, const Mat& C, Eigen::Index blocks) {
    const Eigen::Index n = A.cols(), m = C.rows();
    Mat obsv(m * blocks, n);
    Mat CAk = C;
    for (Eigen::Index k = 0; k < blocks; ++k) {
        obsv.middleRows(k * m, m) = CAk;
        CAk = CAk * A;
    }
    return obsv;
}

inline StructuralReport structural_checks(const Mat& A, const Mat& B, const Mat& C) {
    const Eigen::Index n = A.rows();
    StructuralReport rep;
    rep.controllable = numerical_rank(controllability_matrix(A, B, n)) == n;
    rep.observable = numerical_rank(observability_matrix(A, C, n)) == n;
    rep.rho = spectral_radius(A);
    return rep;
}

/// Gate for ground-truth plants: stability plus minimality (candidates under
/// search are screened with admissible() instead, which reports reasons).
inline void validate_plant(const LinearSystem& sys) {
    require(sys.A.rows() == sys.A.cols(), "A must be square");
    require(sys.B.rows() == sys.n(), "B row count must match state dimension");
    require(sys.C.cols() == sys.n(), "C column count must match state dimension");
    if (!(sys.sigma_w > 0.0) || !(sys.sigma_z > 0.0))
        throw InvalidPlant("noise scales must be positive");
    const StructuralReport rep = structural_checks(sys.A, sys.B, sys.C);
    if (rep.rho >= 1.0)
        throw InvalidPlant("plant is not stable: spectral radius " + std::to_string(rep.rho));
    if (!rep.controllable) throw InvalidPlant("plant is not controllable");
    if (!rep.observable) throw InvalidPlant("plant is not observable");
}

inline void validate_weights(const CostWeights& w, Eigen::Index m, Eigen::Index p) {
    require(w.Q.rows() == m && w.Q.cols() == m, "Q must be m x m");
    require(w.R.rows() == p && w.R.cols() == p, "R must be p x p");
    const double qasym = (w.Q - w.Q.transpose()).norm();
    const double rasym = (w.R - w.R.transpose()).norm();
    if (qasym > 1e-12 * (1.0 + w.Q.norm()) || rasym > 1e-12 * (1.0 + w.R.norm()))
        throw InvalidPlant("cost weights must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eq(w.Q), er(w.R);
    if (eq.eigenvalues().minCoeff() < -1e-12) throw InvalidPlant("Q must be PSD");
    if (er.eigenvalues().minCoeff() <= 0.0) throw InvalidPlant("R must be positive definite");
}

}  // namespace lqgopt
