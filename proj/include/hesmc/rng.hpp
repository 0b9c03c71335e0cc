#pragma once

#include <cstdint>

namespace hesmc {

/// Counter-based 64-bit generator (splitmix64, Steele/Lea/Flood constants).
/// Chosen for bit-exact reproducibility from a seed across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    std::uint64_t state() const { return state_; }

    static constexpr const char* name() { return "splitmix64"; }

private:
    std::uint64_t state_;
};

}  // namespace hesmc
