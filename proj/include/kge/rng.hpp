#pragma once

#include "kge/tensor.hpp"

#include <cstdint>
#include <random>

namespace kge {

/// A seeded random stream. Independent consumers get streams derived from
/// (seed, stream id) so that adding a consumer never shifts another's draws.
class SeedStream {
public:
    explicit SeedStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
        engine_.seed(seq);
    }

    std::mt19937_64& engine() { return engine_; }
    std::uint64_t next() { return engine_(); }

    float uniform(float lo, float hi) { return std::uniform_real_distribution<float>(lo, hi)(engine_); }
    float normal(float mean, float stddev) { return std::normal_distribution<float>(mean, stddev)(engine_); }
    std::int32_t uniform_int(std::int32_t lo, std::int32_t hi_inclusive) {
        return std::uniform_int_distribution<std::int32_t>(lo, hi_inclusive)(engine_);
    }

private:
    std::mt19937_64 engine_;
};

/// Trainable leaf with entries drawn from U(-bound, bound).
inline Tensor uniform_parameter(Shape shape, float bound, SeedStream& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (float& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace kge
