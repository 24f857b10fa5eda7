#pragma once

#include "jumpctl/common.hpp"
#include "jumpctl/random.hpp"

#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace jumpctl {

/// One atom of a finite-activity Lévy measure: jumps of size `mark` arriving
/// at `rate` events per unit time.
struct JumpAtom {
    Vec mark;
    double rate = 0.0;
};

/// Lévy measure represented as an ordered list of weighted atoms. Atom order
/// is part of the model identity: every sum iterates in that order.
class LevyModel {
public:
    LevyModel() = default;
    /// Throws DomainError for a zero mark, a nonpositive rate, or marks of
    /// mixed dimension.
    explicit LevyModel(std::vector<JumpAtom> atoms);

    std::span<const JumpAtom> atoms() const noexcept { return atoms_; }
    const JumpAtom& atom(std::size_t j) const { return atoms_.at(j); }
    std::size_t size() const noexcept { return atoms_.size(); }
    bool empty() const noexcept { return atoms_.empty(); }
    double total_rate() const noexcept { return total_rate_; }
    /// Dimension of the mark space (0 for the empty measure).
    std::size_t mark_dim() const noexcept { return mark_dim_; }

    /// Σ_j rate_j (1 ∧ |mark_j|²), finite by construction.
    double small_jump_integral() const;

private:
    std::vector<JumpAtom> atoms_;
    double total_rate_ = 0.0;
    std::size_t mark_dim_ = 0;
};

namespace detail {

inline double magnitude(double x) { return std::abs(x); }
template <class Derived>
double magnitude(const Eigen::MatrixBase<Derived>& x) { return x.norm(); }

inline bool all_finite(double x) { return std::isfinite(x); }
template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) { return x.allFinite(); }

[[noreturn]] void throw_nonfinite(std::size_t atom_index, const Vec& mark);

}  // namespace detail

/// (Σ_j rate_j |K(mark_j)|^p)^{1/p}. K may return a scalar or a vector.
template <class MarkFn>
double norm_lambda_p(const LevyModel& model, MarkFn&& k, double p) {
    if (!(p >= 1.0)) throw DomainError("norm_lambda_p: p must be >= 1");
    double sum = 0.0;
    for (std::size_t j = 0; j < model.size(); ++j) {
        const auto& a = model.atom(j);
        const auto value = k(a.mark);
        if (!detail::all_finite(value)) detail::throw_nonfinite(j, a.mark);
        sum += a.rate * std::pow(detail::magnitude(value), p);
    }
    return std::pow(sum, 1.0 / p);
}

/// Σ_j rate_j K(mark_j): the per-unit-time compensator of ∫K dμ.
template <class MarkFn>
auto compensator_integral(const LevyModel& model, MarkFn&& k) {
    using Raw = std::decay_t<decltype(k(std::declval<const Vec&>()))>;
    if constexpr (std::is_arithmetic_v<Raw>) {
        double sum = 0.0;
        for (std::size_t j = 0; j < model.size(); ++j) {
            const auto& a = model.atom(j);
            const double value = k(a.mark);
            if (!std::isfinite(value)) detail::throw_nonfinite(j, a.mark);
            sum += a.rate * value;
        }
        return sum;
    } else {
        Vec sum;
        for (std::size_t j = 0; j < model.size(); ++j) {
            const auto& a = model.atom(j);
            const Vec value = k(a.mark);
            if (!value.allFinite()) detail::throw_nonfinite(j, a.mark);
            if (j == 0) sum = Vec::Zero(value.size());
            sum += a.rate * value;
        }
        return sum;
    }
}

/// A jump event of the Poisson random measure.
struct JumpEvent {
    double time = 0.0;
    std::size_t atom = 0;
};

/// Samples the jump events on (t0, t1], sorted by time. Deterministic given the
/// stream state; an empty measure yields no events.
std::vector<JumpEvent> sample_jumps(const LevyModel& model, double t0, double t1, Stream& stream);

}  // namespace jumpctl
