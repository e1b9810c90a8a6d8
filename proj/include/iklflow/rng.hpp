#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "iklflow/errors.hpp"

namespace iklflow {

/// SplitMix64 stream. The state is a plain counter advanced by the Weyl
/// constant, so the n-th output is a pure function of (seed, n) and the
/// stream is identical across platforms and runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53 bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (cosine branch only, two uniforms
    /// per draw; no cached state).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * M_PI * u2);
    }

    /// Index draw by inverse CDF over nonnegative weights (not
    /// necessarily normalized).
    Eigen::Index sample_index(const Eigen::VectorXd &weights) {
        const double total = weights.sum();
        if (!(total > 0.0)) {
            throw InputError("sample_index: weights must have positive total mass");
        }
        double u = uniform() * total;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) { return i; }
        }
        return weights.size() - 1;
    }

private:
    std::uint64_t state_;
};

}  // namespace iklflow
