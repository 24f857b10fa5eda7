#pragma once

#include "jumpctl/common.hpp"
#include "jumpctl/grid.hpp"
#include "jumpctl/levy.hpp"
#include "jumpctl/problem.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace jumpctl {

struct SimulationOptions {
    /// Euler sub-steps per recording interval.
    std::size_t substeps = 1;
    std::size_t workers = 1;
    bool record_jumps = true;
    /// Runs with a larger fraction of diverged paths throw DivergenceError.
    double max_divergence_fraction = 0.01;
};

/// A jump applied to one path, with the state just before it.
struct LoggedJump {
    double time = 0.0;
    std::size_t atom = 0;
    std::size_t interval = 0;
    Vec pre_state;
};

/// Seeded ensemble of controlled jump-diffusion paths recorded on a time grid.
/// States, Brownian increments and control indices are stored path-major.
class PathEnsemble {
public:
    PathEnsemble() = default;
    PathEnsemble(TimeGrid grid, std::size_t paths, std::size_t state_dim, std::size_t noise_dim,
                 std::size_t atom_count, std::uint64_t seed);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t state_dim() const noexcept { return n_; }
    std::size_t noise_dim() const noexcept { return d_; }
    std::size_t atom_count() const noexcept { return atoms_; }
    std::uint64_t seed() const noexcept { return seed_; }

    Vec state(std::size_t path, std::size_t node) const;
    double state(std::size_t path, std::size_t node, std::size_t k) const {
        return states_[(path * grid_.nodes() + node) * n_ + k];
    }
    /// Brownian increment over [t_i, t_{i+1}].
    Vec brownian_increment(std::size_t path, std::size_t interval) const;
    /// Number of type-j jumps over (t_i, t_{i+1}].
    std::size_t jump_count(std::size_t path, std::size_t interval, std::size_t atom) const {
        return counts_[(path * grid_.intervals() + interval) * atoms_ + atom];
    }
    /// Control-grid index in force at node i.
    std::size_t control(std::size_t path, std::size_t node) const {
        return controls_[path * grid_.nodes() + node];
    }
    std::span<const LoggedJump> jumps(std::size_t path) const { return jump_log_[path]; }
    bool diverged(std::size_t path) const { return diverged_[path] != 0; }
    std::size_t diverged_count() const;
    std::size_t active_paths() const { return paths_ - diverged_count(); }

    // Mutable access for the simulator.
    double* state_row(std::size_t path, std::size_t node) { return &states_[(path * grid_.nodes() + node) * n_]; }
    double* increment_row(std::size_t path, std::size_t interval) {
        return &increments_[(path * grid_.intervals() + interval) * d_];
    }
    void set_control(std::size_t path, std::size_t node, std::size_t index) {
        controls_[path * grid_.nodes() + node] = static_cast<std::uint32_t>(index);
    }
    void add_jump(std::size_t path, std::size_t interval, std::size_t atom) {
        ++counts_[(path * grid_.intervals() + interval) * atoms_ + atom];
    }
    std::vector<LoggedJump>& jump_log(std::size_t path) { return jump_log_[path]; }
    void mark_diverged(std::size_t path) { diverged_[path] = 1; }

private:
    TimeGrid grid_;
    std::size_t paths_ = 0;
    std::size_t n_ = 1;
    std::size_t d_ = 1;
    std::size_t atoms_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> states_;
    std::vector<double> increments_;
    std::vector<std::uint32_t> controls_;
    std::vector<std::uint16_t> counts_;
    std::vector<std::vector<LoggedJump>> jump_log_;
    std::vector<std::uint8_t> diverged_;
};

/// Euler scheme for the continuous part with the jump compensator in the
/// drift; jumps are applied at their exact event times. Path i draws from
/// Stream(seed, i), so results do not depend on the worker count.
PathEnsemble simulate_forward(const ProblemSpec& spec, const ControlLaw& control, const Vec& x0,
                              const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                              const SimulationOptions& options = {});

struct MomentPoint {
    double time = 0.0;
    double value = 0.0;
    double se = 0.0;
};

/// Per-node mean of |X|^p over non-diverged paths.
std::vector<MomentPoint> moment_curve(const PathEnsemble& ens, double p);

struct LpNormEstimates {
    Estimate sup;          // E[sup_s |X_s|^p]
    Estimate integral_p;   // E[∫|X_r|^p dr]
    Estimate integral_2;   // E[(∫|X_r|^2 dr)^{p/2}]
};

LpNormEstimates lp_norm_estimates(const PathEnsemble& ens, double p);

struct DecayReport {
    bool bounded = false;
    double sup_witness = 0.0;   // sup over nodes of m(s) e^{(p/2)(eta - eps)s}
    double early_sup = 0.0;     // over the first three quarters of the horizon
    double late_sup = 0.0;      // over the final quarter
    double rate = 0.0;          // (p/2)(eta - eps)
};

/// Requires 0 < epsilon < eta_bp.
DecayReport decay_rate_check(std::span<const MomentPoint> curve, double eta_bp, double epsilon, double p);

struct ContinuousDependenceReport {
    Estimate ratio;        // E[sup|ΔX|^p + ∫|ΔX|^p] / |x - x'|^p
    Estimate sup_term;
    Estimate integral_term;
};

/// Runs both starting points on identical noise.
ContinuousDependenceReport continuous_dependence_check(const ProblemSpec& spec, const ControlLaw& control,
                                                       const Vec& x, const Vec& x_prime, const TimeGrid& grid,
                                                       std::size_t paths, double p, std::uint64_t seed,
                                                       const SimulationOptions& options = {});

/// Deterministic integrand h(t, mark) of the compensated Poisson integral.
using MarkTimeFn = std::function<double(double t, const Vec& mark)>;

struct PoissonMomentReport {
    Estimate sup_moment;       // E[sup_{s<=T} |I_s|^p]
    Estimate terminal_moment;  // E[|I_T|^p]
    double rhs = 0.0;          // ∫∫|h|^p λ dr + (∫∫|h|^2 λ dr)^{p/2}
    double ratio = 0.0;        // sup_moment / rhs, 0 when both vanish
};

PoissonMomentReport poisson_moment_check(const LevyModel& model, const MarkTimeFn& h, double T, double p,
                                         std::size_t paths, std::uint64_t seed, std::size_t workers = 1);

/// E|I_T|^p for constant h by conditioning on the jump count (k <= kmax).
double poisson_moment_oracle(const LevyModel& model, double h, double T, double p, std::size_t kmax = 20);

/// Horizon with exp(-(p/2)(eta - eps)T) = tail_tol, eps = eta/10.
double truncation_horizon(double eta_bp, double p, double tail_tol = 1e-4);

}  // namespace jumpctl
