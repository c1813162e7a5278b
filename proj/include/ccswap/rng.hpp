#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ccswap/backbone.hpp"
#include "ccswap/tensor.hpp"

namespace ccswap {

// Independent stream per purpose, all derived from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
    return fnv1a(purpose, seed ^ 0x6a09e667f3bcc909ull);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    Latent normal_like(const Shape3& shape) {
        Latent out(shape);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal_(engine_);
        return out;
    }

    // uniform integer in [lo, hi)
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi - 1)(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ccswap
