#include "jumpctl/common.hpp"

#include <cmath>

namespace jumpctl {

Estimate mean_and_se(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n == 0) return {};
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    if (n == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace jumpctl
