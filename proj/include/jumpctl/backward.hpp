#pragma once

#include "jumpctl/forward.hpp"
#include "jumpctl/grid.hpp"
#include "jumpctl/problem.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace jumpctl {

enum class BsdeMethod { lsmc, markovian };

const char* method_name(BsdeMethod m);
BsdeMethod parse_method(const std::string& name);

using TerminalFn = std::function<double(const Vec& x)>;

struct BsdeOptions {
    BsdeMethod method = BsdeMethod::lsmc;
    /// Total polynomial degree of the regression basis.
    std::size_t lsmc_degree = 3;
    double ridge = 1e-8;
    /// Terminal value Y_T = terminal(X_T); zero when empty.
    TerminalFn terminal;
    /// Replaces the driver of the spec when set.
    DriverFn driver;
    /// State grid of the markovian backend.
    StateGrid grid;
    /// Gauss–Hermite points per noise dimension (markovian).
    std::size_t quadrature_points = 7;
    std::size_t workers = 1;
};

/// Backward solution on the ensemble's time grid. Y, Z and K are stored per
/// path and node; the markovian backend also keeps its grid values.
class BsdeSolution {
public:
    TimeGrid grid;
    BsdeMethod method = BsdeMethod::lsmc;
    std::size_t paths = 0;
    std::size_t noise_dim = 1;
    std::size_t atoms = 0;
    /// Y at the initial state; the SE is zero for the markovian backend.
    Estimate y0;
    std::vector<double> Y;  // paths x nodes
    std::vector<double> Z;  // paths x nodes x noise_dim
    std::vector<double> K;  // paths x nodes x atoms
    /// Y_T + Σ_n f_n dt per path (lsmc; empty otherwise).
    std::vector<double> pathwise_cost;
    /// Markovian grid values per time node (nodes x grid size).
    StateGrid state_grid;
    std::vector<std::vector<double>> grid_values;
    std::vector<std::vector<double>> grid_z;  // nodes x (grid size x noise_dim)
    std::vector<std::vector<double>> grid_k;  // nodes x (grid size x atoms)
    /// Fraction of markovian lookups outside the extended grid domain.
    double escape_fraction = 0.0;

    double y(std::size_t path, std::size_t node) const { return Y[path * grid.nodes() + node]; }
    double z(std::size_t path, std::size_t node, std::size_t k) const {
        return Z[(path * grid.nodes() + node) * noise_dim + k];
    }
    double k(std::size_t path, std::size_t node, std::size_t atom) const {
        return K[(path * grid.nodes() + node) * atoms + atom];
    }
    /// Per-node mean and SE of Y over the finite entries.
    Estimate y_mean(std::size_t node) const;
};

/// Implicit-in-Y, explicit-in-(Z, K) backward induction. The lsmc backend
/// regresses on the forward ensemble; the markovian backend works on
/// options.grid and projects onto the ensemble paths by interpolation.
BsdeSolution solve_bsde(const ProblemSpec& spec, const ControlLaw& control, const PathEnsemble& ens,
                        const BsdeOptions& options = {});

/// Discretisation shared by cost evaluation, DPP and verification runs.
struct Numerics {
    double dt = 0.02;
    double T = 10.0;
    std::size_t substeps = 1;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    BsdeOptions bsde;
};

/// J(x; u) = Y_0 on [0, numerics.T].
Estimate cost_J(const ProblemSpec& spec, const ControlLaw& control, const Vec& x, const Numerics& numerics);

struct PicardReport {
    /// Mean |Y^{k+1} - Y^k| maximised over nodes, one entry per sweep.
    std::vector<double> sweep_differences;
    /// Ratio of the last two sweep differences.
    double contraction_factor = 0.0;
};

/// Picard iteration over the whole horizon (diagnostic only).
PicardReport picard_diagnostic(const ProblemSpec& spec, const ControlLaw& control, const PathEnsemble& ens,
                               const BsdeOptions& options = {}, std::size_t sweeps = 10);

struct ComparisonReport {
    bool holds = false;
    Estimate y1;
    Estimate y2;
    /// SE of the paired difference Y^1_0 - Y^2_0.
    double gap_se = 0.0;
    /// Max over nodes of mean(Y^1 - Y^2).
    double worst_gap = 0.0;
};

/// Checks f1 <= f2 on a probe grid (DomainError with the witness otherwise),
/// then solves both BSDEs on the shared ensemble.
ComparisonReport comparison_check(const ProblemSpec& spec, const DriverFn& f1, const DriverFn& f2,
                                  const ControlLaw& control, const PathEnsemble& ens,
                                  const BsdeOptions& options = {});

struct AprioriReport {
    Estimate sup_y;        // E[sup |Y|^p]
    Estimate int_y;        // E[(∫|Y|^2)^{p/2}]
    Estimate int_z;        // E[(∫|Z|^2)^{p/2}]
    Estimate int_k;        // E[(∫|K|_{λ,2}^2)^{p/2}]
    double lhs = 0.0;
    double rhs = 0.0;      // |ξ|^p + data functionals of the coefficients at zero
    double ratio = 0.0;    // lhs/rhs, 0 when both vanish
};

AprioriReport bsde_apriori_check(const BsdeSolution& sol, const PathEnsemble& ens, const ProblemSpec& spec,
                                 double p, const DriverFn& driver = {});

}  // namespace jumpctl
