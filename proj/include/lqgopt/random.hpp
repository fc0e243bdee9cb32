#pragma once

#include "lqgopt/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace lqgopt {

/// Independently seeded Gaussian stream. Streams are keyed by (seed, tag) so
/// that e.g. plant noise draws do not shift when the controller changes.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::string_view tag) : engine_(mix(seed, tag)) {}

    double sample() { return normal_(engine_); }

    Vec vector(Eigen::Index dim, double std_dev = 1.0) {
        Vec v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v(i) = std_dev * sample();
        return v;
    }

    Mat matrix(Eigen::Index rows, Eigen::Index cols) {
        Mat M(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = sample();
        return M;
    }

    double uniform01() { return uniform_(engine_); }

private:
    // splitmix64 over the seed and a FNV-1a hash of the tag
    static std::uint64_t mix(std::uint64_t seed, std::string_view tag) {
        std::uint64_t h = 14695981039346656037ull;
        for (char c : tag) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ull;
        }
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Random stable system generator for tests and scenario configs: draws A with
/// spectral radius rescaled into (0, rho_max], Gaussian B and C, and rejects
/// draws that fail controllability/observability.
struct RandomSystemOptions {
    Eigen::Index n = 3;
    Eigen::Index m = 1;
    Eigen::Index p = 1;
    double rho_max = 0.9;
    double sigma_w = 1.0;
    double sigma_z = 1.0;
};

}  // namespace lqgopt
