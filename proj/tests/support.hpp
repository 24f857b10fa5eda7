#pragma once

#include <cmath>
#include <cstdint>

namespace jumpctl::testing {

/// SplitMix64 stream for property tests, independent of the library RNG.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : s_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    /// Uniform on [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    bool coin() { return (next() & 1u) != 0; }

private:
    std::uint64_t s_;
};

inline bool near_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

}  // namespace jumpctl::testing
