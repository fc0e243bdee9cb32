#pragma once

#include "lqgopt/lyapunov.hpp"

namespace lqgopt {

/// Truncated ARX parameter matrix
///   M = [CF, C Abar F, ..., C Abar^{H-1} F, CB, C Abar B, ..., C Abar^{H-1} B]
/// of shape m x (m+p)H. Block k of the output half maps y_{t-k-1}, block k of
/// the input half maps u_{t-k-1} (most recent first).
struct MarkovParams {
    Mat M;
    long H = 0;
    Eigen::Index m = 0;
    Eigen::Index p = 0;

    /// k-th output block C Abar^{k-1} F, 1-based, m x m.
    Mat F_block(long k) const { return M.middleCols((k - 1) * m, m); }
    /// k-th input block C Abar^{k-1} B, 1-based, m x p.
    Mat G_block(long k) const { return M.middleCols(m * H + (k - 1) * p, p); }
};

inline MarkovParams markov_params(const Mat& A_bar, const Mat& F, const Mat& B, const Mat& C,
                                  long H) {
    const Eigen::Index m = C.rows(), p = B.cols();
    MarkovParams mp;
    mp.H = H;
    mp.m = m;
    mp.p = p;
    mp.M.resize(m, (m + p) * H);
    Mat CAk = C;  // C Abar^k
    for (long k = 0; k < H; ++k) {
        mp.M.middleCols(k * m, m) = CAk * F;
        mp.M.middleCols(m * H + k * p, p) = CAk * B;
        CAk = CAk * A_bar;
    }
    return mp;
}

inline MarkovParams markov_params(const LinearSystem& sys, const SteadyStateSolution& ss,
                                  long H) {
    return markov_params(ss.A_bar, ss.F, sys.B, sys.C, H);
}

/// Leading H_s blocks of both halves, e.g. for feeding a shorter Hankel.
inline MarkovParams truncate_blocks(const MarkovParams& mp, long H_s) {
    if (H_s > mp.H) throw DimensionMismatch("cannot truncate to more blocks than present");
    MarkovParams out;
    out.H = H_s;
    out.m = mp.m;
    out.p = mp.p;
    out.M.resize(mp.M.rows(), (mp.m + mp.p) * H_s);
    out.M.leftCols(mp.m * H_s) = mp.M.leftCols(mp.m * H_s);
    out.M.rightCols(mp.p * H_s) = mp.M.middleCols(mp.m * mp.H, mp.p * H_s);
    return out;
}

}  // namespace lqgopt
