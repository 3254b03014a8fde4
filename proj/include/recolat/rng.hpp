#pragma once

// Counter-based random numbers (Philox4x64-10). A generator is a pure function
// of (seed, stream, position), so replicate r always sees the same numbers no
// matter how replicates are scheduled.

#include <array>
#include <cstdint>
#include <limits>

namespace recolat {

using Philox4x64Block = std::array<std::uint64_t, 4>;

inline Philox4x64Block philox4x64(Philox4x64Block ctr, std::array<std::uint64_t, 2> key)
{
    constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
        const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
        const auto lo0 = static_cast<std::uint64_t>(p0);
        const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
        const auto lo1 = static_cast<std::uint64_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

// Satisfies UniformRandomBitGenerator. Key = (seed, stream); the counter
// enumerates 4-word output blocks.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (pos_ == 4) {
            buffer_ = philox4x64({block_, 0, 0, 0}, key_);
            ++block_;
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    std::uint64_t seed() const { return key_[0]; }
    std::uint64_t stream() const { return key_[1]; }

private:
    std::array<std::uint64_t, 2> key_;
    std::uint64_t block_ = 0;
    Philox4x64Block buffer_{};
    int pos_ = 4;
};

}  // namespace recolat
