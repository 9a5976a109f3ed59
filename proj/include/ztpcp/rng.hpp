#pragma once

#include <cstdint>
#include <limits>

namespace ztpcp {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless mix of two words, used to derive child seeds.
inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// Seeded xoshiro256** stream. Identical (seed, stream) pairs produce
/// identical sequences on every platform. Satisfies UniformRandomBitGenerator.
class RngHandle {
public:
    using result_type = std::uint64_t;

    explicit RngHandle(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {
        std::uint64_t sm = mix_seed(seed, stream);
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    // Independent child stream; does not advance this handle.
    RngHandle child(std::uint64_t stream) const noexcept {
        return RngHandle(mix_seed(seed_, stream_), stream);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), unbiased (Lemire). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        std::uint64_t x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    friend bool operator==(const RngHandle& a, const RngHandle& b) noexcept {
        return a.s_[0] == b.s_[0] && a.s_[1] == b.s_[1] && a.s_[2] == b.s_[2] && a.s_[3] == b.s_[3];
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t s_[4]{};
};

}  // namespace ztpcp
