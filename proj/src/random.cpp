#include "jumpctl/random.hpp"

namespace jumpctl {

Stream::Stream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(salt)};
    engine_.seed(seq);
}

double Stream::uniform() {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double u = dist(engine_);
    while (u <= 0.0) u = dist(engine_);
    return u;
}

}  // namespace jumpctl
