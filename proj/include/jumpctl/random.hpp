#pragma once

#include <cstdint>
#include <random>

namespace jumpctl {

/// Seeded random stream. Substreams are keyed by (seed, index, salt) so that
/// per-path streams are independent of the order in which paths are run.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t index = 0, std::uint64_t salt = 0);

    double normal() { return normal_(engine_); }
    /// Uniform on the open interval (0, 1).
    double uniform();
    double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Salts separating the substream families used by the toolkit.
namespace salt {
inline constexpr std::uint64_t forward = 0x66;
inline constexpr std::uint64_t poisson = 0x70;
inline constexpr std::uint64_t validation = 0x76;
inline constexpr std::uint64_t policies = 0x7a;
}  // namespace salt

}  // namespace jumpctl
