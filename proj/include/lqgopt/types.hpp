#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lqgopt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Error types. Numerical routines throw; structural screening (candidate
// admissibility) reports reasons instead of throwing.
// ---------------------------------------------------------------------------

struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndefiniteResult : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularInnerMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnstableClosedLoop : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidPlant : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceDetected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientHistory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RankDeficient : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularAhat : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoFeasibleCandidate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientPoints : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DimensionMismatch(what);
}

}  // namespace lqgopt
