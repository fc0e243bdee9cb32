#pragma once

#include "lqgopt/markov.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lqgopt {

/// phi_t = [y_{t-1}' ... y_{t-H}'  u_{t-1}' ... u_{t-H}']', most recent first
/// within each block. Requires t >= H so the window is fully populated.
inline Vec build_regressor(const std::vector<Vec>& ys, const std::vector<Vec>& us, long t,
                           long H) {
    if (t < H) throw InsufficientHistory("need t >= H to form a full regressor window");
    require(static_cast<long>(ys.size()) >= t && static_cast<long>(us.size()) >= t,
            "history shorter than t");
    const Eigen::Index m = ys.front().size(), p = us.front().size();
    Vec phi((m + p) * H);
    for (long k = 1; k <= H; ++k) {
        phi.segment((k - 1) * m, m) = ys[static_cast<std::size_t>(t - k)];
        phi.segment(m * H + (k - 1) * p, p) = us[static_cast<std::size_t>(t - k)];
    }
    return phi;
}

/// Accumulates regressor rows as running sums: the Gram matrix V = lambda I +
/// sum phi phi' and the cross moment Phi'Y. Row storage is optional; long runs
/// disable it and everything downstream works from the sums.
class RegressorDataset {
public:
    RegressorDataset(Eigen::Index phi_dim, Eigen::Index y_dim, double lambda,
                     bool keep_rows = true)
        : lambda_(lambda),
          keep_rows_(keep_rows),
          V_(lambda * Mat::Identity(phi_dim, phi_dim)),
          cross_(Mat::Zero(phi_dim, y_dim)),
          yy_(Mat::Zero(y_dim, y_dim)) {
        if (!(lambda > 0.0)) throw DomainError("regularizer lambda must be positive");
    }

    void add(const Vec& phi, const Vec& y) {
        require(phi.size() == V_.rows() && y.size() == cross_.cols(), "row dimension mismatch");
        V_.selfadjointView<Eigen::Lower>().rankUpdate(phi);
        cross_ += phi * y.transpose();
        yy_ += y * y.transpose();
        ++rows_;
        if (keep_rows_) {
            phi_rows_.push_back(phi);
            y_rows_.push_back(y);
        }
    }

    long rows() const { return rows_; }
    double lambda() const { return lambda_; }
    Eigen::Index phi_dim() const { return V_.rows(); }
    Eigen::Index y_dim() const { return cross_.cols(); }

    /// V_t = lambda I + sum phi phi' (full symmetric matrix).
    Mat V() const { return Mat(V_.selfadjointView<Eigen::Lower>()); }

    const std::vector<Vec>& stored_phi() const { return phi_rows_; }
    const std::vector<Vec>& stored_y() const { return y_rows_; }

    /// Ridge solution Mhat' = V^{-1} Phi'Y of the regularized least squares.
    Mat estimate_M() const {
        const Mat Vfull = V();
        return Vfull.ldlt().solve(cross_).transpose();
    }

    double log_det_V() const {
        Eigen::LDLT<Mat> ldlt(V());
        return ldlt.vectorD().array().log().sum();
    }

    /// Smallest eigenvalue of the raw Gram sum phi phi' (without lambda I).
    double lambda_min_gram() const {
        const Mat G = V() - lambda_ * Mat::Identity(V_.rows(), V_.cols());
        Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    double condition_number_V() const {
        Eigen::SelfAdjointEigenSolver<Mat> es(V(), Eigen::EigenvaluesOnly);
        return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    }

    /// Sample covariance of the regression residuals y - Mhat phi, an
    /// agent-feasible estimate of the innovation covariance. Computed from the
    /// running sums; eigenvalues floored at a small positive value.
    Mat residual_covariance(double floor = 1e-8) const {
        const Eigen::Index m = cross_.cols();
        if (rows_ == 0) return Mat::Identity(m, m);
        const Mat M = estimate_M();
        const Mat gram = V() - lambda_ * Mat::Identity(V_.rows(), V_.cols());
        Mat R = yy_ - cross_.transpose() * M.transpose() - M * cross_ +
                M * gram * M.transpose();
        R /= static_cast<double>(rows_);
        R = 0.5 * (R + R.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(R);
        return es.eigenvectors() * es.eigenvalues().cwiseMax(floor).asDiagonal() *
               es.eigenvectors().transpose();
    }

private:
    double lambda_;
    bool keep_rows_;
    long rows_ = 0;
    Mat V_;
    Mat cross_;
    Mat yy_;
    std::vector<Vec> phi_rows_;
    std::vector<Vec> y_rows_;
};

/// Squared confidence radius of the self-normalized ellipsoid
///   tr((Mhat - M) V_t (Mhat - M)') <= beta_t:
///   beta_t = (sqrt(m * nn * log(det(V_t)^{1/2} / (delta det(lambda I)^{1/2})))
///            + S sqrt(lambda) + t sqrt(H) / T^2)^2
/// where nn bounds ||C Sigma C' + sigma_z^2 I||. The log-det goes through an
/// LDLT factorization rather than a determinant.
inline double confidence_beta(const Mat& V, double lambda, double delta, double S,
                              double noise_norm, Eigen::Index m, long H, long t, long T) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0,1)");
    Eigen::LDLT<Mat> ldlt(V);
    const double log_det_V = ldlt.vectorD().array().log().sum();
    const double d = static_cast<double>(V.rows());
    const double log_ratio = 0.5 * (log_det_V - d * std::log(lambda)) + std::log(1.0 / delta);
    if (log_ratio <= 0.0)
        throw DomainError("determinant ratio term non-positive: corrupted Gram matrix");
    const double root = std::sqrt(static_cast<double>(m) * noise_norm * log_ratio) +
                        S * std::sqrt(lambda) +
                        static_cast<double>(t) * std::sqrt(static_cast<double>(H)) /
                            (static_cast<double>(T) * static_cast<double>(T));
    return root * root;
}

inline double confidence_beta(const RegressorDataset& data, double delta, double S,
                              double noise_norm, long H, long t, long T) {
    return confidence_beta(data.V(), data.lambda(), delta, S, noise_norm, data.y_dim(), H, t,
                           T);
}

/// Agent-feasible spectral bound on ||Mhat - M|| implied by the ellipsoid:
/// sigma_min(V_t) ||Mhat - M||_F^2 <= beta_t.
inline double m_two_norm_bound(const RegressorDataset& data, double beta) {
    Eigen::SelfAdjointEigenSolver<Mat> es(data.V(), Eigen::EigenvaluesOnly);
    const double sigma_min = es.eigenvalues().minCoeff();
    return std::sqrt(beta / sigma_min);
}

/// Bound on the error of the leading H_s blocks of Mhat (both halves): the
/// same ellipsoid restricted to the columns a short Hankel consumes,
///   ||(Mhat - M) E|| <= sqrt(beta * lambda_max(E' V^{-1} E)),
/// which keeps decaying as long as the low-lag directions stay excited.
inline double m_two_norm_bound_sub(const RegressorDataset& data, double beta, Eigen::Index m,
                                   Eigen::Index p, long H, long H_s) {
    const Eigen::Index d = data.phi_dim();
    require(d == (m + p) * H, "phi dimension does not match (m+p)H");
    const Eigen::Index k = (m + p) * H_s;
    Mat E = Mat::Zero(d, k);
    for (Eigen::Index j = 0; j < m * H_s; ++j) E(j, j) = 1.0;
    for (Eigen::Index j = 0; j < p * H_s; ++j) E(m * H + j, m * H_s + j) = 1.0;
    const Mat X = data.V().ldlt().solve(E);
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(E.transpose() * X), Eigen::EigenvaluesOnly);
    return std::sqrt(beta * es.eigenvalues().maxCoeff());
}

/// Center estimate plus both radius forms, as produced per epoch.
struct ArxConfidence {
    Mat M_hat;
    double beta = 0.0;           // squared ellipsoid radius
    double two_norm_bound = 0.0; // bound on ||Mhat - M||
};

/// Truncation length making the ARX bias term negligible:
///   H = max(2n+1, ceil(log(c_H T^2 sqrt(m) / sqrt(lambda)) / log(1/upsilon))).
inline long choose_H(long T, double upsilon_bound, double c_H, Eigen::Index m, double lambda,
                     Eigen::Index n) {
    if (!(upsilon_bound > 0.0 && upsilon_bound < 1.0))
        throw DomainError("upsilon bound must lie in (0,1)");
    const double Td = static_cast<double>(T);
    const double arg = c_H * Td * Td * std::sqrt(static_cast<double>(m)) / std::sqrt(lambda);
    const long decay_len =
        static_cast<long>(std::ceil(std::log(arg) / std::log(1.0 / upsilon_bound)));
    return std::max<long>(2 * n + 1, decay_len);
}

struct ExcitationPoint {
    long t = 0;                    // time label of the checkpoint
    double lambda_min_over_t = 0;  // lambda_min(sum phi phi') / t
};

struct ExcitationReport {
    std::vector<ExcitationPoint> history;
    double lambda_min_over_t = 0.0;  // final checkpoint
    double rel_variation = 0.0;      // (max-min)/median over the final half
    bool persistent = false;
};

namespace detail {

inline ExcitationReport summarize_excitation(std::vector<ExcitationPoint> history,
                                             double floor) {
    ExcitationReport rep;
    rep.history = std::move(history);
    if (rep.history.empty()) return rep;
    rep.lambda_min_over_t = rep.history.back().lambda_min_over_t;
    // final half of the phase in time, not in checkpoint count
    const long t_half = rep.history.back().t / 2;
    std::vector<double> tail;
    for (const auto& pt : rep.history)
        if (pt.t >= t_half) tail.push_back(pt.lambda_min_over_t);
    std::sort(tail.begin(), tail.end());
    const double lo = tail.front(), hi = tail.back();
    const double med = tail[tail.size() / 2];
    rep.rel_variation = med > 0.0 ? (hi - lo) / med : (hi > lo ? 1e300 : 0.0);
    rep.persistent = lo > floor;
    return rep;
}

}  // namespace detail

/// Streaming variant used inside control loops: record lambda_min checkpoints
/// as data accrues, summarize at the end of a phase.
class ExcitationMonitor {
public:
    explicit ExcitationMonitor(double floor = 1e-8) : floor_(floor) {}

    void checkpoint(long t, const RegressorDataset& data) {
        if (data.rows() == 0) return;
        history_.push_back({t, data.lambda_min_gram() / static_cast<double>(t)});
    }

    ExcitationReport report() const { return detail::summarize_excitation(history_, floor_); }

private:
    double floor_;
    std::vector<ExcitationPoint> history_;
};

/// Post-hoc diagnostic over a dataset with stored rows: prefix-Gram minimum
/// eigenvalue at geometrically spaced checkpoints.
inline ExcitationReport gram_excitation(const RegressorDataset& data, double floor = 1e-8,
                                        int checkpoints = 32) {
    const auto& rows = data.stored_phi();
    if (rows.empty()) return detail::summarize_excitation({}, floor);
    const Eigen::Index d = data.phi_dim();
    std::vector<long> marks;
    const double n_rows = static_cast<double>(rows.size());
    for (int i = 1; i <= checkpoints; ++i) {
        const long mark =
            static_cast<long>(std::llround(n_rows * static_cast<double>(i) / checkpoints));
        if (mark >= 1 && (marks.empty() || mark > marks.back())) marks.push_back(mark);
    }
    std::vector<ExcitationPoint> history;
    Mat G = Mat::Zero(d, d);
    std::size_t next = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        G.selfadjointView<Eigen::Lower>().rankUpdate(rows[i]);
        if (next < marks.size() && static_cast<long>(i + 1) == marks[next]) {
            Eigen::SelfAdjointEigenSolver<Mat> es(Mat(G.selfadjointView<Eigen::Lower>()),
                                                  Eigen::EigenvaluesOnly);
            history.push_back({static_cast<long>(i + 1),
                               es.eigenvalues().minCoeff() / static_cast<double>(i + 1)});
            ++next;
        }
    }
    return detail::summarize_excitation(std::move(history), floor);
}

}  // namespace lqgopt
