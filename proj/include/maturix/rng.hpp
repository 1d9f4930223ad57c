#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace maturix {

/// Independent random stream identified by (master seed, stream index).
///
/// The state is derived by hashing the pair through SplitMix64, so stream k
/// of a seed is the same whichever worker draws it, and distinct indices give
/// unrelated sequences. The generator itself is xoshiro256**. Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
        std::uint64_t x = mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL));
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            s = mix(x);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Exp(1) variate.
    double exponential() { return -std::log1p(-uniform()); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t state_[4];
};

}  // namespace maturix
