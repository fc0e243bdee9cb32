#pragma once

#include "lqgopt/lyapunov.hpp"

#include <algorithm>

namespace lqgopt {

struct NoiseEvolution {
    Mat G;
    double sigma_min = 0.0;
    bool degenerate = false;  // sigma_min numerically zero (no noise content in some row)
};

namespace detail {

inline double smallest_singular_value(const Mat& G) {
    if (G.rows() > 32 || G.cols() > 32) {
        Eigen::BDCSVD<Mat> svd(G);
        return svd.singularValues().minCoeff();
    }
    Eigen::JacobiSVD<Mat> svd(G);
    return svd.singularValues().minCoeff();
}

}  // namespace detail

/// Single-row open-loop response block: maps the last H noise triples
/// (w_{s-1}, z_s, u_s), most recent first, onto f_s = [y_s; u_s] under i.i.d.
/// Gaussian excitation.
inline Mat open_loop_block(const LinearSystem& sys, long H) {
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();
    const Eigen::Index triple = n + m + p;
    Mat G = Mat::Zero(m + p, H * triple);
    // instantaneous terms: y_s picks up z_s, u_s is itself
    G.block(0, n, m, m) = Mat::Identity(m, m);
    G.block(m, n + m, p, p) = Mat::Identity(p, p);
    Mat CAk = sys.C;  // C A^{j-1} for the j-th lagged triple
    for (long j = 1; j < H; ++j) {
        G.block(0, j * triple, m, n) = CAk;
        G.block(0, j * triple + n + m, m, p) = CAk * sys.B;
        CAk = CAk * sys.A;
    }
    return G;
}

/// Truncated open-loop noise evolution parameter: H shifted copies of the
/// single-row block, mapping 2H stacked noise triples onto the interleaved
/// regressor [f_{t-1}; ...; f_{t-H}].
inline NoiseEvolution build_G_ol(const LinearSystem& sys, long H) {
    const Eigen::Index m = sys.m(), p = sys.p();
    const Eigen::Index triple = sys.n() + m + p;
    const Mat Go = open_loop_block(sys, H);
    NoiseEvolution out;
    out.G = Mat::Zero(H * (m + p), 2 * H * triple);
    for (long i = 0; i < H; ++i)
        out.G.block(i * (m + p), i * triple, m + p, H * triple) = Go;
    out.sigma_min = detail::smallest_singular_value(out.G);
    out.degenerate = out.sigma_min <= 1e-12 * std::max(1.0, out.G.norm());
    return out;
}

/// Instantaneous closed-loop response of f_s = [y_s; u_s] to (w_{s-1}, z_s).
inline Mat closed_loop_instant_block(const LinearSystem& sys, const Mat& K, const Mat& L) {
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();
    Mat G1(m + p, n + m);
    const Mat KL = K * L;
    G1.topLeftCorner(m, n) = sys.C;
    G1.topRightCorner(m, m) = Mat::Identity(m, m);
    G1.bottomLeftCorner(p, n) = -KL * sys.C;
    G1.bottomRightCorner(p, m) = -KL;
    return G1;
}

/// Readout of f_s from the joint (state, estimate) pair.
inline Mat closed_loop_readout(const LinearSystem& sys, const Mat& K) {
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();
    Mat Gamma = Mat::Zero(m + p, 2 * n);
    Gamma.topLeftCorner(m, n) = sys.C;
    Gamma.bottomRightCorner(p, n) = -K;
    return Gamma;
}

/// Single-row closed-loop response block
///   Gbar = [G1, Gamma G2 G3, Gamma G2^2 G3, ..., Gamma G2^{H-1} G3]
/// mapping the last H noise pairs (w_{s-1}, z_s) onto f_s under the output
/// feedback (K, L).
inline Mat closed_loop_block(const LinearSystem& sys, const Mat& K, const Mat& L, long H) {
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();
    const Eigen::Index pair = n + m;
    Mat Gbar(m + p, H * pair);
    Gbar.leftCols(pair) = closed_loop_instant_block(sys, K, L);
    const Mat G2 = closed_loop_dynamics(sys.A, sys.B, sys.C, K, L);
    const Mat G3 = closed_loop_noise_map(sys.A, sys.C, L);
    const Mat Gamma = closed_loop_readout(sys, K);
    Mat G2k = G2;  // G2^k
    for (long k = 1; k < H; ++k) {
        Gbar.middleCols(k * pair, pair) = Gamma * G2k * G3;
        G2k = G2 * G2k;
    }
    return Gbar;
}

/// Truncated closed-loop noise evolution parameter: H shifted copies of Gbar
/// over 2H stacked noise pairs.
inline NoiseEvolution build_G_cl(const LinearSystem& sys, const Mat& K, const Mat& L, long H) {
    const Eigen::Index m = sys.m(), p = sys.p();
    const Eigen::Index pair = sys.n() + m;
    const Mat Gbar = closed_loop_block(sys, K, L, H);
    NoiseEvolution out;
    out.G = Mat::Zero(H * (m + p), 2 * H * pair);
    for (long i = 0; i < H; ++i)
        out.G.block(i * (m + p), i * pair, m + p, H * pair) = Gbar;
    out.sigma_min = detail::smallest_singular_value(out.G);
    out.degenerate = out.sigma_min <= 1e-12 * std::max(1.0, out.G.norm());
    return out;
}

}  // namespace lqgopt
