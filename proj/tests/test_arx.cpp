#include "lqgopt/agent.hpp"
#include "lqgopt/arx.hpp"
#include "lqgopt/plant.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace lqgopt;

namespace {

std::vector<Vec> as_vectors(std::initializer_list<double> values) {
    std::vector<Vec> out;
    for (double v : values) out.push_back(Vec::Constant(1, v));
    return out;
}

}  // namespace

TEST_CASE("build_regressor: layout and history window") {
    SECTION("H=1") {
        const Vec phi = build_regressor(as_vectors({9.0, 2.0}), as_vectors({8.0, 3.0}), 2, 1);
        REQUIRE(phi.size() == 2);
        REQUIRE(phi(0) == 2.0);
        REQUIRE(phi(1) == 3.0);
    }
    SECTION("H=2, most recent first in each block") {
        const Vec phi =
            build_regressor(as_vectors({1.0, 2.0, 3.0}), as_vectors({4.0, 5.0, 6.0}), 3, 2);
        REQUIRE(phi.size() == 4);
        REQUIRE(phi(0) == 3.0);  // y_{t-1}
        REQUIRE(phi(1) == 2.0);  // y_{t-2}
        REQUIRE(phi(2) == 6.0);  // u_{t-1}
        REQUIRE(phi(3) == 5.0);  // u_{t-2}
    }
    SECTION("insufficient history") {
        REQUIRE_THROWS_AS(build_regressor(as_vectors({1.0}), as_vectors({1.0}), 1, 2),
                          InsufficientHistory);
    }
}

TEST_CASE("noiseless predictor form satisfies y_t = M phi_t at t = H") {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
        const LinearSystem sys = oracle::random_admissible(seed, 2);
        const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
        const SteadyStateSolution ss = solve_steady_state(sys, w);
        const long H = 6;
        const MarkovParams mp = markov_params(sys, ss, H);

        // predictor-form rollout with e == 0 and x_0 = 0
        GaussianStream rng(seed, "test/inputs");
        std::vector<Vec> ys, us;
        Vec x = Vec::Zero(sys.n());
        for (long t = 0; t < H; ++t) {
            const Vec y = sys.C * x;
            const Vec u = rng.vector(sys.p());
            ys.push_back(y);
            us.push_back(u);
            x = ss.A_bar * x + sys.B * u + ss.F * y;
        }
        const Vec y_H = sys.C * x;
        const Vec phi = build_regressor(ys, us, H, H);
        REQUIRE((y_H - mp.M * phi).norm() < 1e-10);
    }
}

TEST_CASE("estimate_M: zero targets give zero estimate") {
    RegressorDataset data(4, 1, 1.0);
    GaussianStream rng(1, "test/phi");
    for (int i = 0; i < 10; ++i) data.add(rng.vector(4), Vec::Zero(1));
    REQUIRE(data.estimate_M().norm() == 0.0);
}

TEST_CASE("estimate_M: exact recovery from recorded-innovation data") {
    // Predictor-form rollout where the innovations are a *recorded* excitation
    // sequence: regressing the innovation-free target y_t - e_t on phi_t makes
    // the relation exact (up to Abar^H), and the e-channel keeps the regressor
    // Gram full rank.
    const LinearSystem sys = oracle::random_admissible(6, 2);
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const SteadyStateSolution ss = solve_steady_state(sys, w);
    const long H = 30;  // Abar^H is negligible
    const MarkovParams mp = markov_params(sys, ss, H);

    GaussianStream rng(6, "test/inputs");
    GaussianStream innov(6, "test/innovations");
    std::vector<Vec> ys, us;
    RegressorDataset data((1 + 1) * H, 1, 1e-10);
    Vec x = Vec::Zero(sys.n());
    const long N = 600;
    for (long t = 0; t < H + N; ++t) {
        const Vec e = innov.vector(sys.m());
        const Vec y = sys.C * x + e;
        ys.push_back(y);
        if (t >= H) data.add(build_regressor(ys, us, t, H), y - e);
        const Vec u = rng.vector(sys.p());
        us.push_back(u);
        x = ss.A_bar * x + sys.B * u + ss.F * y;
    }
    REQUIRE((data.estimate_M() - mp.M).norm() < 1e-6);
}

TEST_CASE("estimate_M matches the explicit normal-equations oracle") {
    const Eigen::Index d = 3;
    RegressorDataset data(d, 2, 0.7);
    GaussianStream rng(2, "test/rows");
    Mat Phi(5, d), Y(5, 2);
    for (int i = 0; i < 5; ++i) {
        const Vec phi = rng.vector(d);
        const Vec y = rng.vector(2);
        Phi.row(i) = phi.transpose();
        Y.row(i) = y.transpose();
        data.add(phi, y);
    }
    const Mat M_oracle =
        ((Phi.transpose() * Phi + 0.7 * Mat::Identity(d, d)).inverse() * Phi.transpose() * Y)
            .transpose();
    REQUIRE((data.estimate_M() - M_oracle).norm() < 1e-12);
}

TEST_CASE("confidence_beta: empty dataset reduces to the lambda-only form") {
    const double lambda = 2.0, delta = 0.1, S = 3.0, nn = 1.5;
    RegressorDataset data(6, 2, lambda);
    const double beta = confidence_beta(data, delta, S, nn, 3, 0, 1000);
    const double root = std::sqrt(2.0 * nn * std::log(1.0 / delta)) + S * std::sqrt(lambda);
    REQUIRE(beta == Catch::Approx(root * root).margin(1e-12));
}

TEST_CASE("confidence_beta: nondecreasing along a data stream") {
    RegressorDataset data(4, 1, 1.0);
    GaussianStream rng(3, "test/stream");
    double prev = confidence_beta(data, 0.1, 1.0, 1.0, 2, 0, 1000);
    for (int t = 1; t <= 50; ++t) {
        data.add(rng.vector(4), rng.vector(1));
        const double beta = confidence_beta(data, 0.1, 1.0, 1.0, 2, t, 1000);
        REQUIRE(beta >= prev - 1e-12);
        prev = beta;
    }
}

TEST_CASE("confidence_beta: corrupted Gram matrix is rejected") {
    // V below lambda I is impossible for a real Gram accumulation
    const Mat V = 0.5 * Mat::Identity(4, 4);
    REQUIRE_THROWS_AS(confidence_beta(V, 1.0, 0.99, 1.0, 1.0, 1, 3, 0, 1000), DomainError);
}

TEST_CASE("choose_H") {
    SECTION("worked example") {
        REQUIRE(choose_H(10000, 0.5, 1.0, 1, 1.0, 2) == 27);
    }
    SECTION("large n dominates") {
        REQUIRE(choose_H(100, 0.5, 1.0, 1, 1.0, 40) == 81);
    }
    SECTION("logarithmic growth in T") {
        const long h1 = choose_H(10000, 0.5, 1.0, 1, 1.0, 1);
        const long h2 = choose_H(100000000, 0.5, 1.0, 1, 1.0, 1);
        REQUIRE(h2 > h1);
        REQUIRE(h2 == static_cast<long>(std::ceil(std::log(1e16) / std::log(2.0))));
    }
}

TEST_CASE("m_two_norm_bound shrinks as the Gram grows") {
    RegressorDataset data(4, 1, 1.0);
    GaussianStream rng(4, "test/grow");
    const double beta = 2.0;
    const double bound0 = m_two_norm_bound(data, beta);
    REQUIRE(bound0 == Catch::Approx(std::sqrt(beta)).margin(1e-12));
    for (int i = 0; i < 200; ++i) data.add(rng.vector(4), rng.vector(1));
    REQUIRE(m_two_norm_bound(data, beta) < bound0);
}

TEST_CASE("gram_excitation: all-zero regressors") {
    RegressorDataset data(3, 1, 1.0);
    for (int i = 0; i < 64; ++i) data.add(Vec::Zero(3), Vec::Zero(1));
    const ExcitationReport rep = gram_excitation(data);
    REQUIRE(rep.lambda_min_over_t == Catch::Approx(0.0).margin(1e-12));
    REQUIRE_FALSE(rep.persistent);
}

TEST_CASE("gram_excitation: warm-up excitation stabilizes at a positive level") {
    const LinearSystem sys = oracle::random_admissible(8, 2);
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    const long H = 5, T_w = 4000;
    Plant plant(sys, w, 8);
    GaussianStream explore(8, "test/explore");
    std::vector<Vec> ys, us;
    RegressorDataset data((1 + 1) * H, 1, 1.0);
    for (long t = 0; t < T_w; ++t) {
        const Vec y = plant.observe();
        ys.push_back(y);
        if (t >= H) data.add(build_regressor(ys, us, t, H), y);
        const Vec u = explore.vector(1, 1.0);
        us.push_back(u);
        plant.apply(u);
    }
    const ExcitationReport rep = gram_excitation(data, 1e-8);
    REQUIRE(rep.persistent);
    REQUIRE(rep.lambda_min_over_t > 0.0);
    REQUIRE(rep.rel_variation < 0.5);
}

TEST_CASE("warmup op: input covariance and dataset size") {
    LinearSystem sys;
    sys.A = Mat::Constant(1, 1, 0.5);
    sys.B = Mat::Constant(1, 1, 1.0);
    sys.C = Mat::Constant(1, 1, 1.0);
    const CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    AgentConfig cfg;
    cfg.T_w = 10000;
    cfg.sigma_u = 0.8;
    const long H = 4;
    const auto res = warmup(sys, w, cfg, 12, H);

    SECTION("row count is T_w - H + 1") {
        REQUIRE(res.dataset.rows() == cfg.T_w - H + 1);
    }
    SECTION("empirical input variance matches sigma_u^2 within 5%") {
        double sum_sq = 0.0;
        for (const auto& u : res.us) sum_sq += u.squaredNorm();
        REQUIRE(sum_sq / static_cast<double>(res.us.size()) ==
                Catch::Approx(0.64).epsilon(0.05));
    }
    SECTION("zero exploration leaves the input block unexcited") {
        AgentConfig quiet = cfg;
        quiet.T_w = 300;
        quiet.sigma_u = 0.0;
        const auto qres = warmup(sys, w, quiet, 13, H);
        const Mat V = qres.dataset.V();
        for (Eigen::Index i = H; i < 2 * H; ++i)
            REQUIRE(V(i, i) == Catch::Approx(quiet.lambda).margin(1e-12));
        REQUIRE_FALSE(gram_excitation(qres.dataset).persistent);
    }
}
