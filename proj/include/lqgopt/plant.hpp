#pragma once

#include "lqgopt/lyapunov.hpp"
#include "lqgopt/random.hpp"
#include "lqgopt/trace.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace lqgopt {

/// Simulates the ground-truth plant with steady-state initialization.
///
/// Within a step the observation precedes the action: observe() emits
/// y_t = C x_t + z_t, then apply(u) incurs cost y'Qy + u'Ru and evolves
/// x_{t+1} = A x_t + B u_t + w_t. Process noise, measurement noise and the
/// initial state draw come from independently seeded streams, so the noise
/// realization is invariant to the controller being run.
class Plant {
public:
    Plant(LinearSystem sys, CostWeights weights, std::uint64_t seed,
          double divergence_guard = 1e6)
        : sys_(std::move(sys)),
          weights_(std::move(weights)),
          w_stream_(seed, "plant/w"),
          z_stream_(seed, "plant/z"),
          guard_(divergence_guard) {
        validate_plant(sys_);
        validate_weights(weights_, sys_.m(), sys_.p());
        GaussianStream init(seed, "plant/x0");
        const Mat Sigma = solve_filter_dare(sys_.A, sys_.C, sys_.sigma_w, sys_.sigma_z);
        Eigen::SelfAdjointEigenSolver<Mat> es(Sigma);
        const Vec sqrt_eig = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        x_ = es.eigenvectors() * sqrt_eig.asDiagonal() * init.vector(sys_.n());
    }

    /// Emit y_t for the current step. Idempotent within a step.
    const Vec& observe() {
        if (!y_) {
            y_ = sys_.C * x_ + z_stream_.vector(sys_.m(), sys_.sigma_z);
            if (y_->norm() > guard_)
                throw DivergenceDetected("||y|| exceeded divergence guard at t=" +
                                         std::to_string(t_));
        }
        return *y_;
    }

    struct StepResult {
        Vec y;
        double cost = 0.0;
    };

    /// Apply u_t against the already-emitted y_t and advance to t+1.
    StepResult apply(const Vec& u) {
        if (!u.allFinite()) throw NonFiniteInput("control input has NaN/Inf at t=" +
                                                 std::to_string(t_));
        require(u.size() == sys_.p(), "input dimension mismatch");
        const Vec y = observe();
        const double cost = (y.transpose() * weights_.Q * y).value() +
                            (u.transpose() * weights_.R * u).value();
        x_ = sys_.A * x_ + sys_.B * u + w_stream_.vector(sys_.n(), sys_.sigma_w);
        y_.reset();
        ++t_;
        return {y, cost};
    }

    const Vec& state() const { return x_; }

    /// Overwrite the hidden state (deterministic test setups).
    void set_state(const Vec& x) {
        require(x.size() == sys_.n(), "state dimension mismatch");
        x_ = x;
        y_.reset();
    }

    long t() const { return t_; }
    const LinearSystem& system() const { return sys_; }
    const CostWeights& weights() const { return weights_; }

private:
    LinearSystem sys_;
    CostWeights weights_;
    GaussianStream w_stream_;
    GaussianStream z_stream_;
    double guard_;
    Vec x_;
    std::optional<Vec> y_;
    long t_ = 0;
};

/// Policy: observation in, control out. Stateful controllers capture their
/// own filter state.
using Controller = std::function<Vec(long t, const Vec& y)>;

inline RunTrace run_closed_loop(const LinearSystem& sys, const CostWeights& weights,
                                const Controller& controller, long T, std::uint64_t seed,
                                double divergence_guard = 1e6) {
    Plant plant(sys, weights, seed, divergence_guard);
    RunTrace trace;
    trace.seed = seed;
    trace.rows.reserve(static_cast<std::size_t>(T));
    double cum = 0.0;
    for (long t = 0; t < T; ++t) {
        const Vec y = plant.observe();
        const Vec u = controller(t, y);
        const auto step = plant.apply(u);
        cum += step.cost;
        trace.rows.push_back({t, -1, step.cost, cum, y.norm(), u.norm(), 0.0});
    }
    return trace;
}

/// u = -K xhat_{t|t} with the steady-state filter of `gains` run on `model`.
/// Returned controller is stateful; fresh instance per run.
inline Controller lqg_controller(const LinearSystem& model, const SteadyStateSolution& gains) {
    const Mat IL = Mat::Identity(model.n(), model.n()) - gains.L * model.C;
    const Mat Acl = model.A - model.B * gains.K;
    auto xhat_pred = std::make_shared<Vec>(Vec::Zero(model.n()));
    return [model, gains, IL, Acl, xhat_pred](long, const Vec& y) {
        const Vec xhat_filt = IL * (*xhat_pred) + gains.L * y;
        const Vec u = -gains.K * xhat_filt;
        *xhat_pred = Acl * xhat_filt;
        return u;
    };
}

}  // namespace lqgopt
