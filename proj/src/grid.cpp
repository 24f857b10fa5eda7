#include "jumpctl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jumpctl {

TimeGrid::TimeGrid(double t0, double T, double dt) : t0_(t0), T_(T) {
    if (!std::isfinite(t0) || !std::isfinite(T) || !(T > t0))
        throw DomainError("TimeGrid: requires finite t0 < T");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("TimeGrid: dt must be positive");
    const double steps = std::round((T - t0) / dt);
    if (steps < 1.0) throw DomainError("TimeGrid: dt exceeds the horizon");
    nodes_ = static_cast<std::size_t>(steps) + 1;
    step_ = (T - t0) / steps;
}

StateGrid::StateGrid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.empty() || axes_.size() > 2) throw DomainError("StateGrid: dimension must be 1 or 2");
    size_ = 1;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        const auto& a = axes_[k];
        const std::string tag = "StateGrid axis " + std::to_string(k);
        if (!(a.lo < a.hi) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
            throw DomainError(tag + ": requires finite lo < hi");
        if (a.count < 8) throw DomainError(tag + ": needs at least 8 nodes");
        if (a.lo <= 0.0 && 0.0 <= a.hi) {
            const double s = -a.lo / h(k);
            if (std::abs(s - std::round(s)) > 1e-9)
                throw DomainError(tag + ": the origin lies inside the box but is not a grid node");
        }
        size_ *= a.count;
    }
}

double StateGrid::min_h() const {
    double m = h(0);
    for (std::size_t k = 1; k < dim(); ++k) m = std::min(m, h(k));
    return m;
}

std::array<std::size_t, 2> StateGrid::multi_index(std::size_t flat) const {
    std::array<std::size_t, 2> m{0, 0};
    m[0] = flat % axes_[0].count;
    if (dim() == 2) m[1] = flat / axes_[0].count;
    return m;
}

std::size_t StateGrid::flat_index(std::array<std::size_t, 2> multi) const {
    return dim() == 2 ? multi[0] + axes_[0].count * multi[1] : multi[0];
}

Vec StateGrid::point(std::size_t flat) const {
    const auto m = multi_index(flat);
    Vec x(static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < dim(); ++k) {
        const auto& a = axes_[k];
        x(static_cast<Eigen::Index>(k)) = m[k] + 1 == a.count ? a.hi : a.lo + static_cast<double>(m[k]) * h(k);
    }
    return x;
}

bool StateGrid::contains(const Vec& x) const {
    for (std::size_t k = 0; k < dim(); ++k) {
        const double v = x(static_cast<Eigen::Index>(k));
        if (v < axes_[k].lo || v > axes_[k].hi) return false;
    }
    return true;
}

bool StateGrid::in_extended_domain(const Vec& x) const {
    for (std::size_t k = 0; k < dim(); ++k) {
        const double width = axes_[k].hi - axes_[k].lo;
        const double v = x(static_cast<Eigen::Index>(k));
        if (!(v >= axes_[k].lo - width && v <= axes_[k].hi + width)) return false;
    }
    return true;
}

namespace {

struct CellCoordinate {
    std::size_t cell;
    double t;
};

CellCoordinate locate(const Axis& a, double h, double x) {
    const double s = (x - a.lo) / h;
    const double c = std::clamp(std::floor(s), 0.0, static_cast<double>(a.count - 2));
    return {static_cast<std::size_t>(c), s - c};
}

}  // namespace

Stencil StateGrid::interpolation(const Vec& x) const {
    Stencil st;
    const auto c0 = locate(axes_[0], h(0), x(0));
    if (dim() == 1) {
        st.add(c0.cell, 1.0 - c0.t);
        st.add(c0.cell + 1, c0.t);
        return st;
    }
    const auto c1 = locate(axes_[1], h(1), x(1));
    const double w0[2] = {1.0 - c0.t, c0.t};
    const double w1[2] = {1.0 - c1.t, c1.t};
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t a = 0; a < 2; ++a)
            st.add(flat_index({c0.cell + a, c1.cell + b}), w0[a] * w1[b]);
    return st;
}

Vec StateGrid::interpolated_gradient(std::span<const double> values, const Vec& x) const {
    Vec g = Vec::Zero(static_cast<Eigen::Index>(dim()));
    const auto c0 = locate(axes_[0], h(0), x(0));
    if (dim() == 1) {
        g(0) = (values[c0.cell + 1] - values[c0.cell]) / h(0);
        return g;
    }
    const auto c1 = locate(axes_[1], h(1), x(1));
    auto v = [&](std::size_t a, std::size_t b) { return values[flat_index({c0.cell + a, c1.cell + b})]; };
    g(0) = ((1.0 - c1.t) * (v(1, 0) - v(0, 0)) + c1.t * (v(1, 1) - v(0, 1))) / h(0);
    g(1) = ((1.0 - c0.t) * (v(0, 1) - v(0, 0)) + c0.t * (v(1, 1) - v(1, 0))) / h(1);
    return g;
}

std::size_t StateGrid::nearest(const Vec& x) const {
    std::array<std::size_t, 2> m{0, 0};
    for (std::size_t k = 0; k < dim(); ++k) {
        const auto& a = axes_[k];
        const double s = std::clamp((x(static_cast<Eigen::Index>(k)) - a.lo) / h(k), 0.0,
                                    static_cast<double>(a.count - 1));
        m[k] = static_cast<std::size_t>(std::ceil(s - 0.5));
    }
    return flat_index(m);
}

}  // namespace jumpctl
