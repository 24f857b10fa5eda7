#pragma once

#include "jumpctl/common.hpp"
#include "jumpctl/grid.hpp"
#include "jumpctl/levy.hpp"
#include "jumpctl/random.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace jumpctl {

// Coefficient signatures. Time is passed explicitly so that decaying-source
// models can be expressed; the stationary HJB solver requires autonomous ones.
using DriftFn = std::function<Vec(double t, const Vec& x, const Vec& u)>;
using DiffusionFn = std::function<Mat(double t, const Vec& x, const Vec& u)>;  // n x d
using JumpFn = std::function<Vec(double t, const Vec& mark, const Vec& x, const Vec& u)>;
using DriverFn =
    std::function<double(double t, const Vec& x, double y, const Vec& z, double k, const Vec& u)>;
using MarkWeightFn = std::function<double(const Vec& mark)>;

struct CoefficientSet {
    DriftFn drift;          // b
    DiffusionFn diffusion;  // sigma
    JumpFn jump;            // gamma
    DriverFn driver;        // f, with k = Σ_j rate_j K(e_j) rho(e_j)
    MarkWeightFn rho;       // jump aggregation weight in the driver
    bool autonomous = true;
};

/// Lipschitz, monotonicity and weight constants the user declares for the
/// coefficients. They are inputs; validate_declared_constants tries to falsify
/// them.
struct DeclaredConstants {
    double ell_b = 0.0;
    double ell_sigma = 0.0;
    double ell_1 = 0.0;
    MarkWeightFn ell_gamma;  // into [0, 1]
    double alpha_b = 1.0;
    double ell_x = 0.0;
    double ell_y = 0.0;
    double ell_z = 0.0;
    double ell_k = 0.0;
    double alpha_f = 1.0;
    double varrho = 1.0;
};

/// Finite control set U. Nonempty, no duplicate points.
class ControlGrid {
public:
    ControlGrid() = default;
    explicit ControlGrid(std::vector<Vec> points);

    std::size_t size() const noexcept { return points_.size(); }
    const Vec& operator[](std::size_t i) const { return points_.at(i); }
    const std::vector<Vec>& points() const noexcept { return points_; }

private:
    std::vector<Vec> points_;
};

struct ProblemSpec {
    std::string name;
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    LevyModel levy;
    CoefficientSet coeffs;
    DeclaredConstants constants;
    ControlGrid controls;

    /// Checks presence of every function, declared-constant ranges, and output
    /// dimensions at the origin for every control and atom.
    void validate() const;
};

/// Maps (time, state) to an index into the control grid. Open-loop controls
/// ignore the state; feedback laws ignore the time.
using ControlLaw = std::function<std::size_t(double t, const Vec& x)>;

ControlLaw constant_control(std::size_t index);
ControlLaw open_loop_control(std::function<std::size_t(double t)> schedule);

/// Σ_j rate_j gamma(t, e_j, x, u); zero vector for the empty measure.
Vec jump_compensator(const ProblemSpec& spec, double t, const Vec& x, const Vec& u);

/// Jump-aggregation weight of the driver: Σ_j rate_j K_j rho(e_j).
double aggregate_jumps(const ProblemSpec& spec, std::span<const double> k_per_atom);

// ---------------------------------------------------------------------------
// Dissipativity certificate

/// c_p = p(p-1)/2 for 2 < p < 3 and p(p-1)2^{p-4} for p = 2 or p >= 3.
double c_p(double p);

/// 2 alpha_b - (p-1) ell_sigma^2 - (2 c_p / p) L_{gamma,2}^2 - c_p L_{gamma,p}^p.
double eta_bp(double alpha_b, double ell_sigma, double L_gamma_2, double L_gamma_p, double p);

struct DissipativityCertificate {
    double p = 2.0;
    double c_p = 0.0;
    double L_gamma_2 = 0.0;
    double L_gamma_p = 0.0;
    double eta_bp = 0.0;
    double eta_b2 = 0.0;
    double alpha_f_bar = 0.0;
    double rho_norm_2 = 0.0;  // |rho|_{lambda,2}
    bool passes_C1p = false;
    bool passes_C2 = false;
    bool passes_C3 = false;
    bool passes_C4 = false;       // f nondecreasing in k on the probe set
    bool passes_C4_weak = false;  // difference quotient in k > -1/varrho
    std::vector<std::string> notes;

    bool passes_all() const { return passes_C1p && passes_C2 && passes_C3 && passes_C4; }
};

DissipativityCertificate certify(const ProblemSpec& spec, double p);

// ---------------------------------------------------------------------------
// Falsification of declared constants

struct StateBox {
    Vec lo;
    Vec hi;
};

struct Violation {
    std::string inequality;
    Vec x;
    Vec x_prime;
    std::size_t control = 0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ViolationReport {
    std::size_t samples = 0;
    std::vector<Violation> violations;
    bool empty() const noexcept { return violations.empty(); }
};

/// Samples random pairs in the box (and y, z, k in [-r, r] with r the box
/// radius) and reports every pair that breaks a declared Lipschitz or
/// monotonicity inequality by more than relative tolerance 1e-9.
ViolationReport validate_declared_constants(const ProblemSpec& spec, std::size_t sample_count,
                                            const StateBox& box, Stream& stream);

// ---------------------------------------------------------------------------
// Admissibility functionals at t = 0, truncated to the grid horizon

struct AdmissibilityEstimate {
    Estimate pi1;
    Estimate pi2;
};

AdmissibilityEstimate admissibility_functionals(const ProblemSpec& spec, const ControlLaw& control,
                                                const Vec& x0, double p, const TimeGrid& grid,
                                                std::size_t paths, std::uint64_t seed,
                                                std::size_t workers = 1);

}  // namespace jumpctl
