#pragma once

#include "jumpctl/backward.hpp"
#include "jumpctl/grid.hpp"
#include "jumpctl/problem.hpp"

#include <span>
#include <string>
#include <vector>

namespace jumpctl {

/// Grid values of the value function with the per-node argmax control.
struct DiscreteValueFunction {
    StateGrid grid;
    std::vector<double> values;
    std::vector<std::size_t> policy;
    /// max_u H per node.
    std::vector<double> residual;
    std::size_t iterations = 0;
    /// Jump targets beyond one domain width outside the grid, per evaluation.
    double escape_fraction = 0.0;
    std::vector<std::string> warnings;
    /// Evaluation-step values of every policy-iteration round (when kept).
    std::vector<std::vector<double>> history;

    double max_residual() const;
    double value_at(const Vec& x) const { return grid.interpolate(values, x); }
};

/// Operator values at one node for one control.
struct OperatorTerms {
    double v = 0.0;
    Vec Dv;      // upwind gradient
    Mat D2v;
    double Lv = 0.0;
    double Bv = 0.0;
    double Cv = 0.0;
    std::size_t escapes = 0;
};

/// L^u v, B^u v and C^u v at a node. Atoms with |e| < delta use the Taylor
/// surrogates; the rest use interpolated (or linearly extrapolated) values.
OperatorTerms operator_terms(const ProblemSpec& spec, const StateGrid& grid, std::span<const double> values,
                             std::size_t node, const Vec& u, double delta = 0.0);

/// L^u v + B^u v + f(x, v, Dv·σ, C^u v, u).
double hamiltonian(const ProblemSpec& spec, const StateGrid& grid, std::span<const double> values,
                   std::size_t node, const Vec& u, double delta = 0.0);

struct HamiltonianEval {
    Vec x;
    double v = 0.0;
    Vec Dv;
    Mat D2v;
    std::vector<double> Bv;  // per control
    std::vector<double> Cv;  // per control
    std::vector<double> H;   // per control
    std::size_t argmax = 0;  // lowest index attaining the max
};

HamiltonianEval evaluate_hamiltonian(const ProblemSpec& spec, const StateGrid& grid,
                                     std::span<const double> values, std::size_t node, double delta = 0.0);

/// Index of the largest entry, lowest index among near-ties.
std::size_t argmax_lowest(std::span<const double> h);

struct HjbOptions {
    double delta = 0.0;
    double tol = 1e-6;
    std::size_t max_iters = 50;
    std::size_t workers = 1;
    bool keep_history = false;
    /// Initial policy; all zeros when empty.
    std::vector<std::size_t> initial_policy;
};

/// Howard policy iteration for sup_u [L^u V + B^u V + f(x, V, DV·σ, C^u V, u)] = 0.
DiscreteValueFunction solve_hjb(const ProblemSpec& spec, const StateGrid& grid, const HjbOptions& options = {});

struct ValueProperties {
    double lipschitz_hat = 0.0;
    double growth_hat = 0.0;
    double semiconvexity_kappa_hat = 0.0;
};

ValueProperties value_properties(const DiscreteValueFunction& V);

/// A named member of a DPP or verification policy family.
struct NamedPolicy {
    std::string name;
    ControlLaw law;
};

struct DppReport {
    double lhs = 0.0;  // V(x)
    double rhs = 0.0;  // max over the family
    double gap = 0.0;  // lhs - rhs
    double gap_se = 0.0;
    std::size_t argmax = 0;  // first family member attaining rhs
    std::vector<Estimate> semigroup;  // per family member
    /// SE of the paired difference (member argmax - member i) on common noise.
    std::vector<double> paired_se;
    /// Family member 0 lies within 3 paired SE of the maximum.
    bool first_attains = false;
};

/// Compares V(x) with max over the family of G_{0,t}[V(X_t)]. Every member is
/// run on the same seed; member 0 is the reference (solver) policy.
DppReport dpp_check(const ProblemSpec& spec, const DiscreteValueFunction& V, double t, const Vec& x,
                    const std::vector<NamedPolicy>& family, const Numerics& numerics);

}  // namespace jumpctl
