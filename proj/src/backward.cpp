#include "jumpctl/backward.hpp"

#include "jumpctl/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace jumpctl {

const char* method_name(BsdeMethod m) { return m == BsdeMethod::lsmc ? "lsmc" : "markovian"; }

BsdeMethod parse_method(const std::string& name) {
    if (name == "lsmc") return BsdeMethod::lsmc;
    if (name == "markovian") return BsdeMethod::markovian;
    throw DomainError("unknown BSDE method '" + name + "' (expected lsmc or markovian)");
}

Estimate BsdeSolution::y_mean(std::size_t node) const {
    std::vector<double> v;
    v.reserve(paths);
    for (std::size_t p = 0; p < paths; ++p)
        if (std::isfinite(y(p, node))) v.push_back(y(p, node));
    if (v.empty()) throw DivergenceError("BsdeSolution: no finite values at node " + std::to_string(node));
    return mean_and_se(v);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Y = ey + f(t, x, Y, z, k, u) dt by fixed-point iteration.
double implicit_y(const DriverFn& f, double t, const Vec& x, double ey, const Vec& z, double k, const Vec& u,
                  double dt) {
    double y = ey;
    for (int it = 0; it < 50; ++it) {
        const double next = ey + f(t, x, y, z, k, u) * dt;
        if (!std::isfinite(next)) throw EvaluationError("solve_bsde: driver returned a nonfinite value");
        if (std::abs(next - y) <= 1e-12 * (1.0 + std::abs(next))) return next;
        y = next;
    }
    std::ostringstream os;
    os << "solve_bsde: implicit step did not contract at t = " << t << " (dt = " << dt << ")";
    throw StepSizeError(os.str());
}

struct Quadrature {
    std::vector<Vec> nodes;
    std::vector<double> weights;
};

/// Tensor Gauss–Hermite rule for the standard normal (Golub–Welsch).
Quadrature gauss_hermite(std::size_t points, std::size_t dim) {
    if (points < 1) throw DomainError("quadrature_points must be >= 1");
    const auto m = static_cast<Eigen::Index>(points);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 1; i < m; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<double> x1(points), w1(points);
    for (Eigen::Index i = 0; i < m; ++i) {
        x1[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
        const double v = es.eigenvectors()(0, i);
        w1[static_cast<std::size_t>(i)] = v * v;
    }
    Quadrature q;
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) total *= points;
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec node(static_cast<Eigen::Index>(dim));
        double w = 1.0;
        std::size_t rest = flat;
        for (std::size_t k = 0; k < dim; ++k) {
            const std::size_t i = rest % points;
            rest /= points;
            node(static_cast<Eigen::Index>(k)) = x1[i];
            w *= w1[i];
        }
        q.nodes.push_back(node);
        q.weights.push_back(w);
    }
    return q;
}

/// Exponent tuples of total degree <= degree over `dims` coordinates.
std::vector<std::array<int, kMaxDim>> monomials(std::size_t dims, std::size_t degree) {
    std::vector<std::array<int, kMaxDim>> out;
    std::array<int, kMaxDim> e{};
    auto rec = [&](auto&& self, std::size_t k, int left) -> void {
        if (k == dims) {
            out.push_back(e);
            return;
        }
        for (int a = 0; a <= left; ++a) {
            e[k] = a;
            self(self, k + 1, left - a);
        }
        e[k] = 0;
    };
    rec(rec, 0, static_cast<int>(degree));
    return out;
}

struct Layout {
    std::size_t nodes, d, J;
};

/// Previous iterate for the Picard diagnostic; null for the implicit solver.
struct Frozen {
    const BsdeSolution* previous = nullptr;
};

void check_step(const ProblemSpec& spec, const TimeGrid& grid) {
    if (grid.dt() * spec.constants.ell_y >= 1.0) {
        std::ostringstream os;
        os << "solve_bsde: dt * ell_y = " << grid.dt() * spec.constants.ell_y
           << " >= 1; the implicit step need not contract";
        throw StepSizeError(os.str());
    }
}

BsdeSolution empty_solution(const PathEnsemble& ens, BsdeMethod method) {
    BsdeSolution sol;
    sol.grid = ens.grid();
    sol.method = method;
    sol.paths = ens.paths();
    sol.noise_dim = ens.noise_dim();
    sol.atoms = ens.atom_count();
    const std::size_t nodes = sol.grid.nodes();
    sol.Y.assign(sol.paths * nodes, kNaN);
    sol.Z.assign(sol.paths * nodes * sol.noise_dim, kNaN);
    sol.K.assign(sol.paths * nodes * sol.atoms, kNaN);
    return sol;
}

double aggregate(const ProblemSpec& spec, const double* k) {
    return aggregate_jumps(spec, std::span<const double>(k, spec.levy.size()));
}

// ---------------------------------------------------------------------------
// Regression backend

BsdeSolution solve_lsmc(const ProblemSpec& spec, const PathEnsemble& ens, const BsdeOptions& opt,
                        const DriverFn& f, const Frozen& frozen) {
    auto sol = empty_solution(ens, BsdeMethod::lsmc);
    const auto& grid = sol.grid;
    const std::size_t nodes = grid.nodes(), d = sol.noise_dim, J = sol.atoms, n = ens.state_dim();
    std::vector<std::size_t> active;
    for (std::size_t p = 0; p < ens.paths(); ++p)
        if (!ens.diverged(p)) active.push_back(p);
    if (active.empty()) throw DivergenceError("solve_bsde: every path diverged");
    const auto N = static_cast<Eigen::Index>(active.size());
    std::vector<double> running(ens.paths(), 0.0);

    const std::size_t last = nodes - 1;
    for (std::size_t p : active) {
        const double yT = opt.terminal ? opt.terminal(ens.state(p, last)) : 0.0;
        if (!std::isfinite(yT)) throw EvaluationError("solve_bsde: terminal value is nonfinite");
        sol.Y[p * nodes + last] = yT;
        for (std::size_t k = 0; k < d; ++k) sol.Z[(p * nodes + last) * d + k] = 0.0;
        for (std::size_t j = 0; j < J; ++j) sol.K[(p * nodes + last) * J + j] = 0.0;
        running[p] = yT;
    }

    for (std::size_t step = last; step-- > 0;) {
        const double t = grid.time(step);
        const double dt = grid.time(step + 1) - t;

        // Standardised coordinates; constant ones drop out of the basis.
        std::vector<std::size_t> coords;
        std::vector<double> mean(n, 0.0), sd(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t p : active) s += ens.state(p, step, k);
            mean[k] = s / static_cast<double>(N);
            for (std::size_t p : active) {
                const double v = ens.state(p, step, k) - mean[k];
                s2 += v * v;
            }
            sd[k] = std::sqrt(s2 / static_cast<double>(N));
            if (sd[k] > 1e-12 * (1.0 + std::abs(mean[k]))) coords.push_back(k);
        }
        const auto exps = monomials(coords.size(), coords.empty() ? 0 : opt.lsmc_degree);
        const auto m = static_cast<Eigen::Index>(exps.size());
        Eigen::MatrixXd phi(N, m);
        for (Eigen::Index r = 0; r < N; ++r) {
            const std::size_t p = active[static_cast<std::size_t>(r)];
            std::array<double, kMaxDim> z{};
            for (std::size_t c = 0; c < coords.size(); ++c)
                z[c] = (ens.state(p, step, coords[c]) - mean[coords[c]]) / sd[coords[c]];
            for (Eigen::Index b = 0; b < m; ++b) {
                double v = 1.0;
                for (std::size_t c = 0; c < coords.size(); ++c)
                    for (int e = 0; e < exps[static_cast<std::size_t>(b)][c]; ++e) v *= z[c];
                phi(r, b) = v;
            }
        }
        Eigen::MatrixXd gram = phi.transpose() * phi / static_cast<double>(N);
        // The intercept is not penalised.
        for (Eigen::Index b = 0; b < m; ++b) {
            const auto& e = exps[static_cast<std::size_t>(b)];
            if (std::any_of(e.begin(), e.begin() + static_cast<long>(coords.size()), [](int v) { return v != 0; }))
                gram(b, b) += opt.ridge;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
            std::ostringstream os;
            os << "solve_bsde: regression normal equations are singular at node " << step;
            throw BasisError(os.str());
        }

        Eigen::VectorXd ynext(N);
        for (Eigen::Index r = 0; r < N; ++r) ynext(r) = sol.Y[active[static_cast<std::size_t>(r)] * nodes + step + 1];
        const Eigen::VectorXd cy = ldlt.solve(phi.transpose() * ynext / static_cast<double>(N));
        const Eigen::VectorXd ey = phi * cy;

        const auto cols = static_cast<Eigen::Index>(d + J);
        Eigen::MatrixXd targets(N, cols);
        for (Eigen::Index r = 0; r < N; ++r) {
            const std::size_t p = active[static_cast<std::size_t>(r)];
            const double centred = ynext(r) - ey(r);
            const Vec db = ens.brownian_increment(p, step);
            for (std::size_t k = 0; k < d; ++k) targets(r, static_cast<Eigen::Index>(k)) = centred * db(static_cast<Eigen::Index>(k)) / dt;
            for (std::size_t j = 0; j < J; ++j) {
                const double lam = spec.levy.atom(j).rate * dt;
                targets(r, static_cast<Eigen::Index>(d + j)) =
                    centred * (static_cast<double>(ens.jump_count(p, step, j)) - lam) / lam;
            }
        }
        Eigen::MatrixXd fitted;
        if (cols > 0) fitted = phi * ldlt.solve(phi.transpose() * targets / static_cast<double>(N));
        if (!ey.allFinite() || (cols > 0 && !fitted.allFinite()))
            throw BasisError("solve_bsde: regression produced nonfinite coefficients at node " + std::to_string(step));

        parallel_for(active.size(), opt.workers, [&](std::size_t r) {
            const std::size_t p = active[r];
            const auto ri = static_cast<Eigen::Index>(r);
            const Vec x = ens.state(p, step);
            const Vec& u = spec.controls[ens.control(p, step)];
            Vec z(static_cast<Eigen::Index>(d));
            for (std::size_t k = 0; k < d; ++k) z(static_cast<Eigen::Index>(k)) = fitted(ri, static_cast<Eigen::Index>(k));
            double* kz = &sol.K[(p * nodes + step) * J];
            for (std::size_t j = 0; j < J; ++j) kz[j] = fitted(ri, static_cast<Eigen::Index>(d + j));
            const double kagg = aggregate(spec, kz);
            double y;
            if (frozen.previous) {
                const auto& prev = *frozen.previous;
                Vec zo(static_cast<Eigen::Index>(d));
                for (std::size_t k = 0; k < d; ++k) zo(static_cast<Eigen::Index>(k)) = prev.z(p, step, k);
                const double ko = aggregate(spec, &prev.K[(p * nodes + step) * J]);
                y = ey(ri) + f(t, x, prev.y(p, step), zo, ko, u) * dt;
            } else {
                y = implicit_y(f, t, x, ey(ri), z, kagg, u, dt);
            }
            sol.Y[p * nodes + step] = y;
            for (std::size_t k = 0; k < d; ++k) sol.Z[(p * nodes + step) * d + k] = z(static_cast<Eigen::Index>(k));
            running[p] += f(t, x, y, z, kagg, u) * dt;
        });
    }

    sol.pathwise_cost.assign(ens.paths(), kNaN);
    std::vector<double> costs;
    costs.reserve(active.size());
    for (std::size_t p : active) {
        sol.pathwise_cost[p] = running[p];
        costs.push_back(running[p]);
    }
    const auto c = mean_and_se(costs);
    sol.y0 = {sol.Y[active.front() * nodes], c.se};
    return sol;
}

// ---------------------------------------------------------------------------
// Grid backend

BsdeSolution solve_markovian(const ProblemSpec& spec, const ControlLaw& control, const PathEnsemble& ens,
                             const BsdeOptions& opt, const DriverFn& f, const Frozen& frozen) {
    const auto& sg = opt.grid;
    if (sg.size() == 0) throw DomainError("solve_bsde: the markovian backend needs a state grid");
    if (sg.dim() != spec.state_dim) throw DomainError("solve_bsde: state grid dimension mismatch");
    if (!control) throw DomainError("solve_bsde: the markovian backend needs a control law");
    auto sol = empty_solution(ens, BsdeMethod::markovian);
    sol.state_grid = sg;
    const auto& grid = sol.grid;
    const std::size_t nodes = grid.nodes(), d = sol.noise_dim, J = sol.atoms, G = sg.size();
    const auto quad = gauss_hermite(opt.quadrature_points, d);
    const auto& c = spec.coeffs;

    sol.grid_values.assign(nodes, std::vector<double>(G, 0.0));
    sol.grid_z.assign(nodes, std::vector<double>(G * d, 0.0));
    sol.grid_k.assign(nodes, std::vector<double>(G * J, 0.0));
    const std::size_t last = nodes - 1;
    for (std::size_t g = 0; g < G; ++g) {
        const double v = opt.terminal ? opt.terminal(sg.point(g)) : 0.0;
        if (!std::isfinite(v)) throw EvaluationError("solve_bsde: terminal value is nonfinite");
        sol.grid_values[last][g] = v;
    }

    std::vector<std::size_t> escapes(G, 0);
    std::size_t lookups = 0;
    for (std::size_t step = last; step-- > 0;) {
        const double t = grid.time(step);
        const double dt = grid.time(step + 1) - t;
        const double root = std::sqrt(dt);
        const double no_jump = std::exp(-spec.levy.total_rate() * dt);
        const auto& next = sol.grid_values[step + 1];
        parallel_for(G, opt.workers, [&](std::size_t g) {
            const Vec x = sg.point(g);
            const std::size_t ui = control(t, x);
            if (ui >= spec.controls.size()) throw DomainError("solve_bsde: control law returned a bad index");
            const Vec& u = spec.controls[ui];
            Vec drift = c.drift(t, x, u);
            std::vector<Vec> gam(J);
            for (std::size_t j = 0; j < J; ++j) {
                const auto& a = spec.levy.atom(j);
                gam[j] = c.jump(t, a.mark, x, u);
                drift -= a.rate * gam[j];
            }
            const Mat s = c.diffusion(t, x, u);
            const Vec centre = x + drift * dt;
            double ey = 0.0;
            Vec z = Vec::Zero(static_cast<Eigen::Index>(d));
            double p_rest = 1.0;
            for (std::size_t cs = 0; cs <= J; ++cs) {
                double prob;
                Vec shift = Vec::Zero(x.size());
                if (cs < J) {
                    prob = spec.levy.atom(cs).rate * dt * no_jump;
                    shift = gam[cs];
                    p_rest -= prob;
                } else {
                    prob = p_rest;
                }
                for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
                    const Vec pt = centre + s * (root * quad.nodes[q]) + shift;
                    if (!sg.in_extended_domain(pt)) ++escapes[g];
                    const double v = sg.interpolate(next, pt);
                    ey += prob * quad.weights[q] * v;
                    z += (prob * quad.weights[q] * v / root) * quad.nodes[q];
                }
            }
            const double here = sg.interpolate(next, x);
            double* kk = &sol.grid_k[step][g * J];
            for (std::size_t j = 0; j < J; ++j) kk[j] = sg.interpolate(next, x + gam[j]) - here;
            const double kagg = aggregate(spec, kk);
            double y;
            if (frozen.previous) {
                const auto& prev = *frozen.previous;
                Vec zo(static_cast<Eigen::Index>(d));
                for (std::size_t k = 0; k < d; ++k) zo(static_cast<Eigen::Index>(k)) = prev.grid_z[step][g * d + k];
                const double ko = aggregate(spec, &prev.grid_k[step][g * J]);
                y = ey + f(t, x, prev.grid_values[step][g], zo, ko, u) * dt;
            } else {
                y = implicit_y(f, t, x, ey, z, kagg, u, dt);
            }
            sol.grid_values[step][g] = y;
            for (std::size_t k = 0; k < d; ++k) sol.grid_z[step][g * d + k] = z(static_cast<Eigen::Index>(k));
        });
        lookups += G * (J + 1) * quad.nodes.size();
    }
    std::size_t escaped = 0;
    for (auto e : escapes) escaped += e;
    sol.escape_fraction = lookups ? static_cast<double>(escaped) / static_cast<double>(lookups) : 0.0;

    // Project onto the ensemble paths.
    parallel_for(ens.paths(), opt.workers, [&](std::size_t p) {
        if (ens.diverged(p)) return;
        for (std::size_t i = 0; i < nodes; ++i) {
            const Vec x = ens.state(p, i);
            const auto st = sg.interpolation(x);
            if (i == last)
                sol.Y[p * nodes + i] = opt.terminal ? opt.terminal(x) : 0.0;
            else
                sol.Y[p * nodes + i] = st.apply(sol.grid_values[i]);
            for (std::size_t k = 0; k < d; ++k) {
                double v = 0.0;
                for (const auto& e : st.view()) v += e.weight * sol.grid_z[i][e.index * d + k];
                sol.Z[(p * nodes + i) * d + k] = v;
            }
            for (std::size_t j = 0; j < J; ++j) {
                double v = 0.0;
                for (const auto& e : st.view()) v += e.weight * sol.grid_k[i][e.index * J + j];
                sol.K[(p * nodes + i) * J + j] = v;
            }
        }
    });
    const Vec x0 = ens.state(0, 0);
    sol.y0 = {sg.interpolate(sol.grid_values[0], x0), 0.0};
    return sol;
}

BsdeSolution solve_impl(const ProblemSpec& spec, const ControlLaw& control, const PathEnsemble& ens,
                        const BsdeOptions& opt, const Frozen& frozen) {
    if (ens.paths() == 0) throw DomainError("solve_bsde: empty ensemble");
    if (ens.state_dim() != spec.state_dim || ens.noise_dim() != spec.noise_dim ||
        ens.atom_count() != spec.levy.size())
        throw DomainError("solve_bsde: ensemble does not match the problem");
    if (!frozen.previous) check_step(spec, ens.grid());
    const DriverFn& f = opt.driver ? opt.driver : spec.coeffs.driver;
    return opt.method == BsdeMethod::lsmc ? solve_lsmc(spec, ens, opt, f, frozen)
                                          : solve_markovian(spec, control, ens, opt, f, frozen);
}

}  // namespace

BsdeSolution solve_bsde(const ProblemSpec& spec, const ControlLaw& control, const PathEnsemble& ens,
                        const BsdeOptions& options) {
    return solve_impl(spec, control, ens, options, {});
}

Estimate cost_J(const ProblemSpec& spec, const ControlLaw& control, const Vec& x, const Numerics& num) {
    SimulationOptions sim;
    sim.substeps = num.substeps;
    sim.workers = num.workers;
    sim.record_jumps = false;
    const TimeGrid grid(0.0, num.T, num.dt);
    const auto ens = simulate_forward(spec, control, x, grid, num.paths, num.seed, sim);
    auto opt = num.bsde;
    opt.workers = num.workers;
    return solve_bsde(spec, control, ens, opt).y0;
}

PicardReport picard_diagnostic(const ProblemSpec& spec, const ControlLaw& control, const PathEnsemble& ens,
                               const BsdeOptions& options, std::size_t sweeps) {
    if (sweeps < 2) throw DomainError("picard_diagnostic: needs at least two sweeps");
    // Start from the zero process.
    BsdeSolution current = empty_solution(ens, options.method);
    std::fill(current.Y.begin(), current.Y.end(), 0.0);
    std::fill(current.Z.begin(), current.Z.end(), 0.0);
    std::fill(current.K.begin(), current.K.end(), 0.0);
    const std::size_t G = options.grid.size();
    current.grid_values.assign(ens.grid().nodes(), std::vector<double>(G, 0.0));
    current.grid_z.assign(ens.grid().nodes(), std::vector<double>(G * ens.noise_dim(), 0.0));
    current.grid_k.assign(ens.grid().nodes(), std::vector<double>(G * ens.atom_count(), 0.0));

    PicardReport report;
    const std::size_t nodes = ens.grid().nodes();
    for (std::size_t s = 0; s < sweeps; ++s) {
        auto next = solve_impl(spec, control, ens, options, Frozen{&current});
        double worst = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t p = 0; p < ens.paths(); ++p) {
                const double a = next.y(p, i), b = current.y(p, i);
                if (!std::isfinite(a) || !std::isfinite(b)) continue;
                sum += std::abs(a - b);
                ++count;
            }
            if (count) worst = std::max(worst, sum / static_cast<double>(count));
        }
        report.sweep_differences.push_back(worst);
        current = std::move(next);
    }
    const auto& d = report.sweep_differences;
    const double prev = d[d.size() - 2];
    report.contraction_factor = prev > 0.0 ? d.back() / prev : 0.0;
    return report;
}

namespace {

void probe_order(const ProblemSpec& spec, const DriverFn& f1, const DriverFn& f2, const TimeGrid& grid) {
    const double xs[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
    const double ys[] = {-1.0, 0.0, 1.0};
    const double ks[] = {-1.0, 0.0, 1.0};
    const auto n = static_cast<Eigen::Index>(spec.state_dim);
    const auto d = static_cast<Eigen::Index>(spec.noise_dim);
    std::vector<Vec> states;
    for (Eigen::Index k = 0; k < n; ++k)
        for (double v : xs) {
            Vec x = Vec::Zero(n);
            x(k) = v;
            states.push_back(x);
        }
    std::vector<Vec> zs{Vec::Zero(d)};
    for (Eigen::Index k = 0; k < d; ++k)
        for (double v : {-1.0, 1.0}) {
            Vec z = Vec::Zero(d);
            z(k) = v;
            zs.push_back(z);
        }
    const std::size_t stride = std::max<std::size_t>(1, grid.intervals() / 8);
    for (std::size_t i = 0; i < grid.nodes(); i += stride) {
        const double t = grid.time(i);
        for (const auto& x : states)
            for (double y : ys)
                for (const auto& z : zs)
                    for (double k : ks)
                        for (const auto& u : spec.controls.points()) {
                            const double a = f1(t, x, y, z, k, u), b = f2(t, x, y, z, k, u);
                            if (a > b + 1e-12 * (1.0 + std::abs(b))) {
                                std::ostringstream os;
                                os << "comparison_check: f1 > f2 at t = " << t << ", x = " << x.transpose()
                                   << ", y = " << y << ", k = " << k << " (" << a << " > " << b << ")";
                                throw DomainError(os.str());
                            }
                        }
    }
}

}  // namespace

ComparisonReport comparison_check(const ProblemSpec& spec, const DriverFn& f1, const DriverFn& f2,
                                  const ControlLaw& control, const PathEnsemble& ens, const BsdeOptions& options) {
    if (!f1 || !f2) throw DomainError("comparison_check: both drivers must be set");
    probe_order(spec, f1, f2, ens.grid());
    auto o1 = options, o2 = options;
    o1.driver = f1;
    o2.driver = f2;
    const auto s1 = solve_bsde(spec, control, ens, o1);
    const auto s2 = solve_bsde(spec, control, ens, o2);
    ComparisonReport r;
    r.y1 = s1.y0;
    r.y2 = s2.y0;
    if (!s1.pathwise_cost.empty()) {
        std::vector<double> diff;
        for (std::size_t p = 0; p < s1.pathwise_cost.size(); ++p)
            if (std::isfinite(s1.pathwise_cost[p]) && std::isfinite(s2.pathwise_cost[p]))
                diff.push_back(s1.pathwise_cost[p] - s2.pathwise_cost[p]);
        if (!diff.empty()) r.gap_se = mean_and_se(diff).se;
    }
    r.worst_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ens.grid().nodes(); ++i) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t p = 0; p < ens.paths(); ++p) {
            const double a = s1.y(p, i), b = s2.y(p, i);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            sum += a - b;
            ++count;
        }
        if (count) r.worst_gap = std::max(r.worst_gap, sum / static_cast<double>(count));
    }
    r.holds = r.y1.value <= r.y2.value + 3.0 * r.gap_se + 1e-12 * (1.0 + std::abs(r.y2.value));
    return r;
}

AprioriReport bsde_apriori_check(const BsdeSolution& sol, const PathEnsemble& ens, const ProblemSpec& spec,
                                 double p, const DriverFn& driver) {
    if (!(p >= 2.0)) throw DomainError("bsde_apriori_check: p must be >= 2");
    if (sol.paths != ens.paths() || sol.grid.nodes() != ens.grid().nodes())
        throw DomainError("bsde_apriori_check: solution and ensemble do not match");
    const DriverFn& f = driver ? driver : spec.coeffs.driver;
    const auto& grid = ens.grid();
    const std::size_t nodes = grid.nodes(), d = sol.noise_dim, J = sol.atoms;
    const Vec zero = Vec::Zero(static_cast<Eigen::Index>(spec.state_dim));
    const Vec zero_z = Vec::Zero(static_cast<Eigen::Index>(spec.noise_dim));
    const double half = p / 2.0;

    std::vector<double> sup_y, int_y, int_z, int_k, rhs;
    for (std::size_t path = 0; path < ens.paths(); ++path) {
        if (ens.diverged(path) || !std::isfinite(sol.y(path, 0))) continue;
        double s = 0.0;
        double ay = 0.0, az = 0.0, ak = 0.0, a2 = 0.0, ap = 0.0;
        double prev[5] = {0, 0, 0, 0, 0};
        for (std::size_t i = 0; i < nodes; ++i) {
            const double t = grid.time(i);
            const Vec& u = spec.controls[ens.control(path, i)];
            const double y = sol.y(path, i);
            double z2 = 0.0, k2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) z2 += sol.z(path, i, k) * sol.z(path, i, k);
            for (std::size_t j = 0; j < J; ++j) k2 += spec.levy.atom(j).rate * sol.k(path, i, j) * sol.k(path, i, j);
            // Coefficients along the control at the zero state.
            const Vec b0 = spec.coeffs.drift(t, zero, u);
            const Mat s0 = spec.coeffs.diffusion(t, zero, u);
            double g2 = 0.0, gp = 0.0;
            for (const auto& a : spec.levy.atoms()) {
                const double g = spec.coeffs.jump(t, a.mark, zero, u).norm();
                g2 += a.rate * g * g;
                gp += a.rate * std::pow(g, p);
            }
            const double f0 = f(t, zero, 0.0, zero_z, 0.0, u);
            const double cur[5] = {y * y, z2, k2, b0.squaredNorm() + s0.squaredNorm() + g2 + f0 * f0,
                                   std::pow(b0.norm(), p) + std::pow(s0.norm(), p) + gp};
            s = std::max(s, std::pow(std::abs(y), p));
            if (i > 0) {
                const double h = t - grid.time(i - 1);
                ay += 0.5 * h * (prev[0] + cur[0]);
                az += 0.5 * h * (prev[1] + cur[1]);
                ak += 0.5 * h * (prev[2] + cur[2]);
                a2 += 0.5 * h * (prev[3] + cur[3]);
                ap += 0.5 * h * (prev[4] + cur[4]);
            }
            std::copy(cur, cur + 5, prev);
        }
        sup_y.push_back(s);
        int_y.push_back(std::pow(ay, half));
        int_z.push_back(std::pow(az, half));
        int_k.push_back(std::pow(ak, half));
        rhs.push_back(std::pow(ens.state(path, 0).norm(), p) + std::pow(a2, half) + ap);
    }
    if (sup_y.empty()) throw DivergenceError("bsde_apriori_check: no usable paths");
    AprioriReport r;
    r.sup_y = mean_and_se(sup_y);
    r.int_y = mean_and_se(int_y);
    r.int_z = mean_and_se(int_z);
    r.int_k = mean_and_se(int_k);
    r.lhs = r.sup_y.value + r.int_y.value + r.int_z.value + r.int_k.value;
    r.rhs = mean_and_se(rhs).value;
    r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : (r.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return r;
}

}  // namespace jumpctl
