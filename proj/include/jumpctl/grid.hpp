#pragma once

#include "jumpctl/common.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace jumpctl {

/// Uniform time grid on [t0, T]. The node count is round((T - t0)/dt) + 1 and
/// the realised step is (T - t0)/(nodes - 1).
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double t0, double T, double dt);

    double t0() const noexcept { return t0_; }
    double T() const noexcept { return T_; }
    double dt() const noexcept { return step_; }
    std::size_t nodes() const noexcept { return nodes_; }
    std::size_t intervals() const noexcept { return nodes_ - 1; }
    double time(std::size_t i) const noexcept {
        return i + 1 == nodes_ ? T_ : t0_ + static_cast<double>(i) * step_;
    }

private:
    double t0_ = 0.0;
    double T_ = 1.0;
    double step_ = 1.0;
    std::size_t nodes_ = 2;
};

struct StencilEntry {
    std::size_t index = 0;
    double weight = 0.0;
};

/// Fixed-capacity linear combination of grid values.
struct Stencil {
    std::array<StencilEntry, 9> entries{};
    std::size_t size = 0;

    void add(std::size_t index, double weight) {
        for (std::size_t i = 0; i < size; ++i) {
            if (entries[i].index == index) {
                entries[i].weight += weight;
                return;
            }
        }
        entries[size++] = {index, weight};
    }
    double apply(std::span<const double> values) const {
        double s = 0.0;
        for (std::size_t i = 0; i < size; ++i) s += entries[i].weight * values[entries[i].index];
        return s;
    }
    std::span<const StencilEntry> view() const { return {entries.data(), size}; }
};

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 8;
};

/// Tensor state grid with at most two dimensions. Dimension 0 varies fastest
/// in the flat node index.
class StateGrid {
public:
    StateGrid() = default;
    /// Throws DomainError unless lo < hi, count >= 8, dim <= 2, and the origin
    /// is a node whenever it lies inside the box.
    explicit StateGrid(std::vector<Axis> axes);
    static StateGrid line(double lo, double hi, std::size_t count) { return StateGrid({Axis{lo, hi, count}}); }

    std::size_t dim() const noexcept { return axes_.size(); }
    std::size_t size() const noexcept { return size_; }
    const Axis& axis(std::size_t k) const { return axes_.at(k); }
    double h(std::size_t k) const { return (axes_[k].hi - axes_[k].lo) / static_cast<double>(axes_[k].count - 1); }
    /// Smallest spacing over all dimensions.
    double min_h() const;

    std::array<std::size_t, 2> multi_index(std::size_t flat) const;
    std::size_t flat_index(std::array<std::size_t, 2> multi) const;
    Vec point(std::size_t flat) const;

    bool contains(const Vec& x) const;
    /// True when x lies within one domain width outside the box in every
    /// dimension (the region where linear extrapolation is accepted).
    bool in_extended_domain(const Vec& x) const;

    /// Multilinear interpolation weights; outside the box the outermost cell is
    /// extended linearly.
    Stencil interpolation(const Vec& x) const;
    double interpolate(std::span<const double> values, const Vec& x) const {
        return interpolation(x).apply(values);
    }
    /// Gradient of the multilinear interpolant at x.
    Vec interpolated_gradient(std::span<const double> values, const Vec& x) const;

    /// Nearest node, lower node on exact ties, clamped to the box.
    std::size_t nearest(const Vec& x) const;

private:
    std::vector<Axis> axes_;
    std::size_t size_ = 0;
};

}  // namespace jumpctl
