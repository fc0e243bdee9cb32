#include "lqgopt/noise_evolution.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace lqgopt;

TEST_CASE("open-loop block: H=1 scalar layout") {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    const NoiseEvolution gol = build_G_ol(sys, 1);
    REQUIRE(gol.G.rows() == 2);
    REQUIRE(gol.G.cols() == 6);
    Mat expected(2, 6);
    expected << 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0;
    REQUIRE((gol.G - expected).norm() < 1e-14);
    REQUIRE(gol.sigma_min == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("open-loop noise map is full row rank on stable systems") {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const LinearSystem sys = oracle::random_admissible(seed, 2);
        const NoiseEvolution gol = build_G_ol(sys, 4);
        REQUIRE(gol.sigma_min > 1e-8);
        REQUIRE_FALSE(gol.degenerate);
    }
}

TEST_CASE("open-loop reconstruction by superposition") {
    const LinearSystem sys = oracle::random_admissible(104, 2);
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();
    const long H = 3, t0 = 20, T = 24;
    const long cut = t0 - 2 * H;  // noises before the stacked window are zeroed

    GaussianStream rng(104, "test/noise");
    std::vector<Vec> w(T), z(T), u(T);
    for (long j = 0; j < T; ++j) {
        w[j] = j < cut ? Vec::Zero(n) : rng.vector(n);
        z[j] = j < cut ? Vec::Zero(m) : rng.vector(m);
        u[j] = j < cut ? Vec::Zero(p) : rng.vector(p);
    }

    // f_j = [y_j; u_j] with a selectable cutoff: only noises with index <= keep
    // participate. keep = T means all.
    auto simulate = [&](long keep) {
        std::vector<Vec> f(T);
        Vec x = Vec::Zero(n);
        for (long j = 0; j < T; ++j) {
            const Vec wj = j <= keep ? w[j] : Vec::Zero(n);
            const Vec zj = j <= keep ? z[j] : Vec::Zero(m);
            const Vec uj = j <= keep ? u[j] : Vec::Zero(p);
            Vec fj(m + p);
            fj.head(m) = sys.C * x + zj;
            fj.tail(p) = uj;
            f[j] = fj;
            x = sys.A * x + sys.B * uj + wj;
        }
        return f;
    };

    const std::vector<Vec> f_all = simulate(T);
    const NoiseEvolution gol = build_G_ol(sys, H);

    Vec phi_bar(H * (m + p));
    Vec residual(H * (m + p));
    for (long i = 0; i < H; ++i) {
        const long s = t0 - 1 - i;
        phi_bar.segment(i * (m + p), m + p) = f_all[s];
        // old-only response: noises up to index s - H survive
        residual.segment(i * (m + p), m + p) = simulate(s - H)[s];
    }

    Vec stacked(2 * H * (n + m + p));
    for (long i = 0; i < 2 * H; ++i) {
        const long j = t0 - 1 - i;
        stacked.segment(i * (n + m + p), n) = w[j];
        stacked.segment(i * (n + m + p) + n, m) = z[j];
        stacked.segment(i * (n + m + p) + n + m, p) = u[j];
    }

    REQUIRE((phi_bar - residual - gol.G * stacked).norm() < 1e-10);
}

TEST_CASE("closed-loop block: K=0, L=0 is degenerate") {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    const NoiseEvolution gcl = build_G_cl(sys, Mat::Zero(1, 1), Mat::Zero(1, 1), 3);
    // u-rows carry no noise content at all
    for (long i = 0; i < 3; ++i) REQUIRE(gcl.G.row(2 * i + 1).norm() == 0.0);
    REQUIRE(gcl.sigma_min == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(gcl.degenerate);
}

TEST_CASE("closed-loop noise map has positive sigma_min under the oracle gains") {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const NoiseEvolution gcl = build_G_cl(sys, ss.K, ss.L, 3);
    REQUIRE(gcl.sigma_min > 0.0);
    REQUIRE_FALSE(gcl.degenerate);
}

TEST_CASE("closed-loop reconstruction by superposition") {
    const LinearSystem sys = oracle::random_admissible(105, 2);
    const CostWeights weights{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, weights);
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();
    const long H = 3, t0 = 20, T = 24;
    const long cut = t0 - 2 * H;

    GaussianStream rng(105, "test/noise");
    // noise pair j is (w_{j-1}, z_j); store by pair index
    std::vector<Vec> wp(T + 1), zp(T + 1);
    for (long j = 0; j <= T; ++j) {
        wp[j] = j < cut ? Vec::Zero(n) : rng.vector(n);
        zp[j] = j < cut ? Vec::Zero(m) : rng.vector(m);
    }

    auto simulate = [&](long keep) {
        std::vector<Vec> f(T);
        Vec x = Vec::Zero(n);
        Vec xf = Vec::Zero(n);  // xhat_{t|t}
        for (long j = 0; j < T; ++j) {
            const Vec zj = j <= keep ? zp[j] : Vec::Zero(m);
            const Vec y = sys.C * x + zj;
            if (j == 0) {
                xf = ss.L * y;  // xhat_{0|-1} = 0
            } else {
                const Vec xpred = (sys.A - sys.B * ss.K) * xf;
                xf = xpred + ss.L * (y - sys.C * xpred);
            }
            const Vec uj = -ss.K * xf;
            Vec fj(m + p);
            fj.head(m) = y;
            fj.tail(p) = uj;
            f[j] = fj;
            // w of pair j+1 drives the transition from j to j+1
            const Vec wj = (j + 1) <= keep ? wp[j + 1] : Vec::Zero(n);
            x = sys.A * x + sys.B * uj + wj;
        }
        return f;
    };

    const std::vector<Vec> f_all = simulate(T);
    const NoiseEvolution gcl = build_G_cl(sys, ss.K, ss.L, H);

    Vec phi_bar(H * (m + p));
    Vec residual(H * (m + p));
    for (long i = 0; i < H; ++i) {
        const long s = t0 - 1 - i;
        phi_bar.segment(i * (m + p), m + p) = f_all[s];
        residual.segment(i * (m + p), m + p) = simulate(s - H)[s];
    }

    Vec stacked(2 * H * (n + m));
    for (long i = 0; i < 2 * H; ++i) {
        const long j = t0 - 1 - i;
        stacked.segment(i * (n + m), n) = wp[j];
        stacked.segment(i * (n + m) + n, m) = zp[j];
    }

    REQUIRE((phi_bar - residual - gcl.G * stacked).norm() < 1e-10);
}
