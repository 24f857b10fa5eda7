#pragma once

#include "jumpctl/backward.hpp"
#include "jumpctl/hjb.hpp"

#include <memory>
#include <string>
#include <vector>

namespace jumpctl {

/// Grid-backed feedback law: the control index of the nearest node (lower
/// node on ties), clamped to the grid box.
class FeedbackPolicy {
public:
    FeedbackPolicy() = default;
    FeedbackPolicy(StateGrid grid, std::vector<std::size_t> indices);

    std::size_t operator()(const Vec& x) const { return (*indices_)[grid_.nearest(x)]; }
    const StateGrid& grid() const noexcept { return grid_; }
    const std::vector<std::size_t>& indices() const { return *indices_; }
    ControlLaw law() const;

private:
    StateGrid grid_;
    std::shared_ptr<const std::vector<std::size_t>> indices_;
};

/// Per-node Hamiltonian argmax of W (lowest index on ties).
FeedbackPolicy feedback_argmax(const ProblemSpec& spec, const DiscreteValueFunction& W, double delta = 0.0);

/// Seeded piecewise-constant feedback policies on the grid: each splits the
/// nodes into 1..8 contiguous blocks with a random control per block.
std::vector<NamedPolicy> random_feedback_policies(const ProblemSpec& spec, const StateGrid& grid,
                                                  std::size_t count, std::uint64_t seed);

struct ConditionCheck {
    std::string name;
    bool passed = false;
    double discrepancy = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct NamedEstimate {
    std::string name;
    Estimate estimate;
};

struct VerificationReport {
    double W_at_x = 0.0;
    Estimate J_closed_loop;
    std::vector<NamedEstimate> suboptimal_J;
    std::vector<ConditionCheck> conditions;
    double exclusion_fraction = 0.0;
    double coverage_miss = 0.0;
    bool optimal_consistent = false;

    /// Throws DomainError when the condition is absent.
    const ConditionCheck& condition(const std::string& name) const;
};

struct ClassicalOptions {
    double rel_tol = 0.02;
    double delta = 0.0;
};

/// Closed-loop cost of the argmax feedback versus W(x0), and dominance of W
/// over every sampled control.
VerificationReport classical_verification(const ProblemSpec& spec, const DiscreteValueFunction& W, const Vec& x0,
                                          const std::vector<NamedPolicy>& sampled, const Numerics& numerics,
                                          const ClassicalOptions& options = {});

struct ViscosityOptions {
    double rel_tol = 0.05;
    double delta = 0.0;
    /// Largest tolerated fraction of path states outside the grid box.
    double max_coverage_miss = 0.01;
    /// Paths used for the local subjet probe of condition (i).
    std::size_t probe_paths = 200;
};

/// Checks conditions (i)-(v) along the closed-loop ensemble of `policy`. The
/// BSDE is solved on the grid of W over [0, T + pad] with zero terminal value,
/// pad = ln(1e4)/alpha_f_bar; (ii)-(iv) are checked on [0, T] and (v) at the
/// far horizon.
VerificationReport viscosity_condition_report(const ProblemSpec& spec, const DiscreteValueFunction& W,
                                              const ControlLaw& policy, const Vec& x0, double T,
                                              const Numerics& numerics, const ViscosityOptions& options = {});

}  // namespace jumpctl
