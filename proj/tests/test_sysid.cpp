#include "lqgopt/sysid.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <complex>

using namespace lqgopt;

namespace {

MarkovParams scalar_markov(std::initializer_list<double> blocks, long H) {
    MarkovParams mp;
    mp.H = H;
    mp.m = 1;
    mp.p = 1;
    mp.M.resize(1, 2 * H);
    Eigen::Index i = 0;
    for (double b : blocks) mp.M(0, i++) = b;
    return mp;
}

std::vector<std::complex<double>> sorted_eigs(const Mat& A) {
    Eigen::EigenSolver<Mat> es(A);
    std::vector<std::complex<double>> v;
    for (Eigen::Index i = 0; i < A.rows(); ++i) v.push_back(es.eigenvalues()(i));
    std::sort(v.begin(), v.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return v;
}

// truth in the same balanced chart, via the exact ARX parameters
SystemEstimate balanced_of(const LinearSystem& sys, long H) {
    const CostWeights w{Mat::Identity(sys.m(), sys.m()), Mat::Identity(sys.p(), sys.p())};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const auto [d1, d2] = default_hankel_split(H, sys.n());
    return balanced_truth(sys, ss, H, d1, d2);
}

}  // namespace

TEST_CASE("hankelize: smallest legal layout") {
    const MarkovParams mp = scalar_markov({1.0, 2.0, 99.0, 10.0, 20.0, 88.0}, 3);
    const HankelPair h = hankelize(mp, 1, 1);
    REQUIRE(h.H_full.rows() == 1);
    REQUIRE(h.H_full.cols() == 4);
    REQUIRE(h.H_full(0, 0) == 1.0);   // F1
    REQUIRE(h.H_full(0, 1) == 2.0);   // F2
    REQUIRE(h.H_full(0, 2) == 10.0);  // G1
    REQUIRE(h.H_full(0, 3) == 20.0);  // G2
    REQUIRE(h.H_minus(0, 0) == 1.0);
    REQUIRE(h.H_minus(0, 1) == 10.0);
    REQUIRE(h.H_plus(0, 0) == 2.0);
    REQUIRE(h.H_plus(0, 1) == 20.0);
}

TEST_CASE("hankelize: block (i,j) equals ARX block i+j-1") {
    GaussianStream rng(7, "test/markov");
    MarkovParams mp;
    mp.H = 7;
    mp.m = 2;
    mp.p = 1;
    mp.M = rng.matrix(2, (2 + 1) * 7);
    const HankelPair h = hankelize(mp, 3, 3);
    for (long i : {1L, 2L, 3L}) {
        for (long j : {1L, 4L}) {
            REQUIRE((h.H_full.block(2 * (i - 1), 2 * (j - 1), 2, 2) - mp.F_block(i + j - 1))
                        .norm() == 0.0);
            REQUIRE((h.H_full.block(2 * (i - 1), 2 * 4 + (j - 1), 2, 1) -
                     mp.G_block(i + j - 1))
                        .norm() == 0.0);
        }
    }
    REQUIRE_THROWS_AS(hankelize(mp, 3, 4), DimensionMismatch);
}

TEST_CASE("hankelize: exact scalar-system Hankel has rank one") {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const MarkovParams mp = markov_params(sys, ss, 5);
    const HankelPair h = hankelize(mp, 2, 2);
    Eigen::JacobiSVD<Mat> svd(h.H_minus);
    REQUIRE(svd.singularValues()(1) < 1e-10 * svd.singularValues()(0));
}

TEST_CASE("extract: scalar round trip reproduces all Markov blocks") {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const long H = 5;
    const MarkovParams mp = markov_params(sys, ss, H);
    const SystemEstimate est = extract(hankelize(mp, 2, 2), 1);

    const MarkovParams rebuilt =
        markov_params(est.A_bar_hat, est.F_hat, est.B_hat, est.C_hat, H);
    REQUIRE((rebuilt.M - mp.M).norm() < 1e-8);

    // construction identity
    REQUIRE((est.A_bar_hat + est.F_hat * est.C_hat - est.A_hat).norm() < 1e-13);

    // n=1 similarity ambiguity is a sign: |c b| and |c f| are invariant
    REQUIRE(std::abs(est.C_hat(0, 0) * est.B_hat(0, 0)) ==
            Catch::Approx(std::abs(sys.C(0, 0) * sys.B(0, 0) * 1.0)).margin(1e-9));
    REQUIRE(std::abs(est.C_hat(0, 0) * est.F_hat(0, 0)) ==
            Catch::Approx(std::abs(sys.C(0, 0) * ss.F(0, 0))).margin(1e-9));
    REQUIRE(est.L_hat(0, 0) * est.A_hat(0, 0) == Catch::Approx(est.F_hat(0, 0)).margin(1e-9));
}

TEST_CASE("extract: eigenvalues of A recovered for random n=2 systems") {
    for (std::uint64_t seed : {201u, 202u, 203u}) {
        const LinearSystem sys = oracle::random_admissible(seed, 2);
        const long H = 2 * 2 + 3;
        const SystemEstimate est = balanced_of(sys, H);
        const auto truth = sorted_eigs(sys.A);
        const auto got = sorted_eigs(est.A_hat);
        for (std::size_t i = 0; i < truth.size(); ++i)
            REQUIRE(std::abs(truth[i] - got[i]) < 1e-6);
    }
}

TEST_CASE("extract: rank-deficient and singular-A failure modes") {
    const MarkovParams zero = scalar_markov({0, 0, 0, 0, 0, 0}, 3);
    REQUIRE_THROWS_AS(extract(hankelize(zero, 1, 1), 1), RankDeficient);

    LinearSystem sys;  // nilpotent A: minimal but singular
    sys.A = (Mat(2, 2) << 0.0, 1.0, 0.0, 0.0).finished();
    sys.B = (Mat(2, 1) << 0.0, 1.0).finished();
    sys.C = (Mat(1, 2) << 1.0, 0.0).finished();
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const MarkovParams mp = markov_params(sys, ss, 7);
    REQUIRE_THROWS_AS(extract(hankelize(mp, 3, 3), 2), SingularAhat);
}

TEST_CASE("Hankel perturbation bounds hold numerically") {
    const LinearSystem sys = oracle::random_admissible(211, 2);
    const long H = 7, d1 = 3, d2 = 3;
    const SystemEstimate ignored = balanced_of(sys, H);  // ensures extractability
    (void)ignored;
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const MarkovParams mp = markov_params(sys, ss, H);

    GaussianStream rng(211, "test/perturb");
    MarkovParams noisy = mp;
    noisy.M += 0.01 * rng.matrix(mp.M.rows(), mp.M.cols());
    const double err = spectral_norm(noisy.M - mp.M);

    const HankelPair h = hankelize(mp, d1, d2), hn = hankelize(noisy, d1, d2);
    REQUIRE(spectral_norm(h.H_full - hn.H_full) <=
            std::sqrt(static_cast<double>(std::min(d1, d2 + 1))) * err + 1e-12);

    auto rank_n = [&](const Mat& M) {
        Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Vec sv = svd.singularValues();
        for (Eigen::Index i = 2; i < sv.size(); ++i) sv(i) = 0.0;
        return Mat(svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose());
    };
    REQUIRE(spectral_norm(rank_n(h.H_minus) - rank_n(hn.H_minus)) <=
            2.0 * std::sqrt(static_cast<double>(std::min(d1, d2))) * err + 1e-12);
}

TEST_CASE("param_confidence: homogeneity in the estimation bound") {
    const ParamConfidence zero = param_confidence(0.0, 3.0, 0.5, 2, 9);
    REQUIRE(zero.beta_A == 0.0);
    REQUIRE(zero.beta_B == 0.0);
    REQUIRE(zero.beta_C == 0.0);
    REQUIRE(zero.beta_L == 0.0);

    const ParamConfidence one = param_confidence(0.1, 3.0, 0.5, 2, 9);
    const ParamConfidence two = param_confidence(0.2, 3.0, 0.5, 2, 9);
    REQUIRE(two.beta_A == Catch::Approx(2.0 * one.beta_A));
    REQUIRE(two.beta_B == Catch::Approx(2.0 * one.beta_B));
    REQUIRE(two.beta_C == Catch::Approx(2.0 * one.beta_C));
    REQUIRE(two.beta_L == Catch::Approx(2.0 * one.beta_L));
    REQUIRE(one.beta_B == Catch::Approx(std::sqrt(20.0 * 2.0 * 9.0 / 0.5) * 0.1));
}

TEST_CASE("align_similarity") {
    const LinearSystem sys = oracle::random_admissible(221, 2);
    const SystemEstimate ref = balanced_of(sys, 7);

    SECTION("estimate equal to the reference") {
        const AlignedErrors ae = align_similarity(ref, ref);
        REQUIRE((ae.T - Mat::Identity(2, 2)).norm() < 1e-10);
        REQUIRE(ae.err_A < 1e-10);
        REQUIRE(ae.err_B < 1e-10);
        REQUIRE(ae.err_C < 1e-10);
        REQUIRE(ae.err_L < 1e-10);
    }

    SECTION("estimate conjugated by a known rotation") {
        const double th = 0.7;
        Mat R(2, 2);
        R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        SystemEstimate est = ref;
        est.A_hat = R.transpose() * ref.A_hat * R;
        est.A_bar_hat = R.transpose() * ref.A_bar_hat * R;
        est.B_hat = R.transpose() * ref.B_hat;
        est.F_hat = R.transpose() * ref.F_hat;
        est.L_hat = R.transpose() * ref.L_hat;
        est.C_hat = ref.C_hat * R;
        est.O_hat = ref.O_hat * R;
        est.ctrl_F_hat = R.transpose() * ref.ctrl_F_hat;
        est.ctrl_B_hat = R.transpose() * ref.ctrl_B_hat;
        const AlignedErrors ae = align_similarity(est, ref);
        REQUIRE((ae.T - R).norm() < 1e-8);
        REQUIRE(ae.err_A < 1e-8);
        REQUIRE(ae.err_B < 1e-8);
        REQUIRE(ae.err_C < 1e-8);
        REQUIRE(ae.err_L < 1e-8);
    }

    SECTION("n=1: alignment picks the sign") {
        LinearSystem scalar;
        scalar.A = Mat::Constant(1, 1, 0.5);
        scalar.B = Mat::Constant(1, 1, 1.0);
        scalar.C = Mat::Constant(1, 1, 1.0);
        const SystemEstimate sref = balanced_of(scalar, 5);
        SystemEstimate flipped = sref;
        flipped.B_hat = -sref.B_hat;
        flipped.C_hat = -sref.C_hat;
        flipped.F_hat = -sref.F_hat;
        flipped.L_hat = -sref.L_hat;
        flipped.O_hat = -sref.O_hat;
        flipped.ctrl_F_hat = -sref.ctrl_F_hat;
        flipped.ctrl_B_hat = -sref.ctrl_B_hat;
        const AlignedErrors ae = align_similarity(flipped, sref);
        REQUIRE(ae.T(0, 0) == Catch::Approx(-1.0));
        REQUIRE(ae.err_A < 1e-12);
        REQUIRE(ae.err_B < 1e-12);
    }
}

TEST_CASE("default Hankel split") {
    const auto [d1a, d2a] = default_hankel_split(7, 2);
    REQUIRE(d1a + d2a + 1 == 7);
    REQUIRE(d1a >= 2);
    REQUIRE(d2a >= 2);
    const auto [d1b, d2b] = default_hankel_split(5, 2);  // forced to the clamp
    REQUIRE(d1b == 2);
    REQUIRE(d2b == 2);
    REQUIRE_THROWS_AS(default_hankel_split(4, 2), DimensionMismatch);
}
