#pragma once

#include "lqgopt/markov.hpp"

#include <cmath>
#include <utility>

namespace lqgopt {

/// Concatenated Hankel pair built from the ARX blocks. Block (i,j) of the
/// F-side Hankel is the (i+j-1)-th output block of M; same for the input side.
struct HankelPair {
    Mat H_full;   // [H_F, H_G], (m d1) x ((m+p)(d2+1))
    Mat H_minus;  // block columns d2+1 and 2d2+2 removed
    Mat H_plus;   // block columns 1 and d2+2 removed
    long d1 = 0;
    long d2 = 0;
    Eigen::Index m = 0;
    Eigen::Index p = 0;
};

inline HankelPair hankelize(const MarkovParams& mp, long d1, long d2) {
    const Eigen::Index m = mp.m, p = mp.p;
    if (d1 + d2 + 1 != mp.H) throw DimensionMismatch("need d1 + d2 + 1 = H");
    if (d1 < 1 || d2 < 1) throw DimensionMismatch("d1, d2 must be >= 1");
    HankelPair h;
    h.d1 = d1;
    h.d2 = d2;
    h.m = m;
    h.p = p;
    h.H_full.resize(m * d1, (m + p) * (d2 + 1));
    for (long i = 1; i <= d1; ++i) {
        for (long j = 1; j <= d2 + 1; ++j) {
            h.H_full.block((i - 1) * m, (j - 1) * m, m, m) = mp.F_block(i + j - 1);
            h.H_full.block((i - 1) * m, m * (d2 + 1) + (j - 1) * p, m, p) =
                mp.G_block(i + j - 1);
        }
    }
    // H-: drop the last block column of each half; H+: drop the first of each.
    h.H_minus.resize(m * d1, (m + p) * d2);
    h.H_minus.leftCols(m * d2) = h.H_full.leftCols(m * d2);
    h.H_minus.rightCols(p * d2) = h.H_full.middleCols(m * (d2 + 1), p * d2);
    h.H_plus.resize(m * d1, (m + p) * d2);
    h.H_plus.leftCols(m * d2) = h.H_full.middleCols(m, m * d2);
    h.H_plus.rightCols(p * d2) = h.H_full.middleCols(m * (d2 + 1) + p, p * d2);
    return h;
}

/// Balanced default split: d1 = floor((H-1)/2), d2 = H-1-d1, both clamped >= n.
inline std::pair<long, long> default_hankel_split(long H, Eigen::Index n) {
    long d1 = (H - 1) / 2;
    long d2 = H - 1 - d1;
    if (d1 < n) {
        d1 = n;
        d2 = H - 1 - d1;
    }
    if (d2 < n) {
        d2 = n;
        d1 = H - 1 - d2;
    }
    if (d1 < n || d2 < n) throw DimensionMismatch("H too small for d1, d2 >= n");
    return {d1, d2};
}

/// State-space parameters recovered from the rank-n factorization, all in the
/// shared balanced coordinates (defined up to an orthogonal transform).
struct SystemEstimate {
    Mat A_hat;
    Mat B_hat;
    Mat C_hat;
    Mat F_hat;
    Mat L_hat;
    Mat A_bar_hat;
    Vec singular_values;  // full spectrum of H-, descending
    Mat O_hat;            // observability factor U S^{1/2}
    Mat ctrl_F_hat;       // controllability factor, output half
    Mat ctrl_B_hat;       // controllability factor, input half
};

namespace detail {

/// Fix SVD sign ambiguity: flip each left singular vector so its largest-
/// magnitude entry is positive, for reproducibility across runs.
inline void fix_svd_signs(Mat& U, Mat& V) {
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        Eigen::Index idx = 0;
        U.col(j).cwiseAbs().maxCoeff(&idx);
        if (U(idx, j) < 0.0) {
            U.col(j) = -U.col(j);
            V.col(j) = -V.col(j);
        }
    }
}

inline Mat pseudo_inverse(const Mat& M, double rel_tol = 1e-12) {
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cut = rel_tol * sv(0);
    Vec inv = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace detail

/// Rank-n spectral extraction of (Abar, A, B, C, F, L) from the Hankel pair.
/// Mirrors the subspace step of the Ho-Kalman family: SVD-truncate H-, split
/// the balanced factors, then recover Abar from H+ and L from H- via F = A L.
inline SystemEstimate extract(const HankelPair& h, Eigen::Index n) {
    const Eigen::Index m = h.m, p = h.p;
    Eigen::JacobiSVD<Mat> svd(h.H_minus, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    if (sv.size() < n || sv(n - 1) <= 0.0 || sv(n - 1) < 1e-12 * sv(0))
        throw RankDeficient("rank-n truncation unreliable: sigma_n too small");
    Mat U = svd.matrixU().leftCols(n);
    Mat V = svd.matrixV().leftCols(n);
    detail::fix_svd_signs(U, V);
    const Vec sqrt_s = sv.head(n).cwiseSqrt();

    SystemEstimate est;
    est.singular_values = sv;
    est.O_hat = U * sqrt_s.asDiagonal();
    const Mat ctrl = sqrt_s.asDiagonal() * V.transpose();  // n x (m+p) d2
    est.ctrl_F_hat = ctrl.leftCols(m * h.d2);
    est.ctrl_B_hat = ctrl.rightCols(p * h.d2);

    est.C_hat = est.O_hat.topRows(m);
    est.F_hat = est.ctrl_F_hat.leftCols(m);
    est.B_hat = est.ctrl_B_hat.leftCols(p);

    const Mat O_pinv = detail::pseudo_inverse(est.O_hat);
    est.A_bar_hat = O_pinv * h.H_plus * detail::pseudo_inverse(ctrl);
    est.A_hat = est.A_bar_hat + est.F_hat * est.C_hat;

    Eigen::JacobiSVD<Mat> asvd(est.A_hat);
    const Vec asv = asvd.singularValues();
    if (asv(asv.size() - 1) < 1e-10 * std::max(1.0, asv(0)))
        throw SingularAhat("recovered A is numerically singular; cannot recover L");
    est.L_hat = (detail::pseudo_inverse(est.A_hat) * O_pinv * h.H_minus).leftCols(m);
    return est;
}

/// Spectral-norm confidence radii for the extracted parameters, as functions
/// of a bound on ||Mhat - M|| and the Hankel spectrum.
struct ParamConfidence {
    double beta_A = 0.0;
    double beta_B = 0.0;
    double beta_C = 0.0;
    double beta_L = 0.0;
    double hankel_norm = 0.0;   // ||H||
    double hankel_sigma_n = 0.0;
    double m_bound = 0.0;       // the ||Mhat - M|| bound used
};

struct ConfidenceConstants {
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    double c_B = 1.0;  // scales the B/C radii; 1.0 recovers the bare formula
};

inline ParamConfidence param_confidence(double m_bound, double hankel_norm,
                                        double hankel_sigma_n, Eigen::Index n, long H,
                                        const ConfidenceConstants& c = {}) {
    if (!(hankel_sigma_n > 0.0)) throw DomainError("sigma_n of the Hankel must be positive");
    ParamConfidence pc;
    pc.hankel_norm = hankel_norm;
    pc.hankel_sigma_n = hankel_sigma_n;
    pc.m_bound = m_bound;
    const double nH = static_cast<double>(n) * static_cast<double>(H);
    pc.beta_A = c.c1 * std::sqrt(nH) * (hankel_norm + hankel_sigma_n) /
                (hankel_sigma_n * hankel_sigma_n) * m_bound;
    pc.beta_B = c.c_B * std::sqrt(20.0 * nH / hankel_sigma_n) * m_bound;
    pc.beta_C = pc.beta_B;
    pc.beta_L = c.c2 * hankel_norm / std::sqrt(hankel_sigma_n) * pc.beta_A +
                c.c3 * std::sqrt(nH) * (hankel_norm + hankel_sigma_n) /
                    std::pow(hankel_sigma_n, 1.5) * m_bound;
    return pc;
}

inline ParamConfidence param_confidence(double m_bound, const SystemEstimate& est,
                                        Eigen::Index n, long H,
                                        const ConfidenceConstants& c = {}) {
    return param_confidence(m_bound, est.singular_values(0), est.singular_values(n - 1), n, H,
                            c);
}

/// Aligned parameter errors after the best orthogonal change of coordinates.
struct AlignedErrors {
    Mat T;  // orthogonal, est ~ T' ref T
    double err_A = 0.0;
    double err_B = 0.0;
    double err_C = 0.0;
    double err_L = 0.0;
    double err_F = 0.0;
};

/// Orthogonal Procrustes over the stacked balanced factors: finds T
/// maximizing tr(T' (O_est' O_ref + ctrl_est ctrl_ref')), then reports the
/// spectral-norm parameter errors in the aligned chart.
inline AlignedErrors align_similarity(const SystemEstimate& est, const SystemEstimate& ref) {
    Mat G = est.O_hat.transpose() * ref.O_hat;
    G += est.ctrl_F_hat * ref.ctrl_F_hat.transpose();
    G += est.ctrl_B_hat * ref.ctrl_B_hat.transpose();
    Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    AlignedErrors out;
    // est ~ T' ref T with T = argmin ||est_factor - ref_factor T||
    out.T = (svd.matrixU() * svd.matrixV().transpose()).transpose();
    const Mat& T = out.T;
    out.err_A = spectral_norm(est.A_hat - T.transpose() * ref.A_hat * T);
    out.err_B = spectral_norm(est.B_hat - T.transpose() * ref.B_hat);
    out.err_C = spectral_norm(est.C_hat - ref.C_hat * T);
    out.err_L = spectral_norm(est.L_hat - T.transpose() * ref.L_hat);
    out.err_F = spectral_norm(est.F_hat - T.transpose() * ref.F_hat);
    return out;
}

/// Reference realization for truth comparison: run the same extraction on the
/// exact ARX parameters of the true system.
inline SystemEstimate balanced_truth(const LinearSystem& sys, const SteadyStateSolution& ss,
                                     long H, long d1, long d2) {
    return extract(hankelize(markov_params(sys, ss, H), d1, d2), sys.n());
}

}  // namespace lqgopt
