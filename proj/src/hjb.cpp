#include "jumpctl/hjb.hpp"

#include "jumpctl/parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace jumpctl {

double DiscreteValueFunction::max_residual() const {
    double m = 0.0;
    for (double r : residual) m = std::max(m, std::abs(r));
    return m;
}

std::size_t argmax_lowest(std::span<const double> h) {
    if (h.empty()) throw DomainError("argmax_lowest: empty input");
    const double best = *std::max_element(h.begin(), h.end());
    const double cut = best - 1e-12 * (1.0 + std::abs(best));
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] >= cut) return i;
    return 0;
}

namespace {

/// Sparse linear form over the grid values.
class Row {
public:
    void add(std::size_t index, double weight) {
        for (auto& e : entries_)
            if (e.first == index) {
                e.second += weight;
                return;
            }
        entries_.emplace_back(index, weight);
    }
    void add(const Stencil& s, double scale) {
        for (const auto& e : s.view()) add(e.index, scale * e.weight);
    }
    void add(const Row& r, double scale) {
        for (const auto& e : r.entries_) add(e.first, scale * e.second);
    }
    double apply(std::span<const double> v) const {
        double s = 0.0;
        for (const auto& e : entries_) s += e.second * v[e.first];
        return s;
    }
    const std::vector<std::pair<std::size_t, double>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::size_t, double>> entries_;
};

/// Linear pieces of the operators at one node for one control.
struct Forms {
    Vec x;
    Vec u;
    Mat sigma;
    std::array<Row, 2> D;                 // upwind gradient per dimension
    std::array<std::array<Row, 2>, 2> D2;  // second differences
    Row L;                                 // Dv·b + ½ tr(σσᵀ D2v)
    Row B;
    Row C;
    std::vector<Row> G;  // (Dv·σ)_k
    std::size_t escapes = 0;
    std::size_t lookups = 0;
};

std::size_t shifted(const StateGrid& g, std::size_t node, std::size_t dim, long offset) {
    auto m = g.multi_index(node);
    m[dim] = static_cast<std::size_t>(static_cast<long>(m[dim]) + offset);
    return g.flat_index(m);
}

Forms build_forms(const ProblemSpec& spec, const StateGrid& grid, std::size_t node, const Vec& u, double delta) {
    Forms f;
    f.x = grid.point(node);
    f.u = u;
    const auto& c = spec.coeffs;
    const std::size_t n = grid.dim();
    const auto m = grid.multi_index(node);
    const Vec b = c.drift(0.0, f.x, u);
    f.sigma = c.diffusion(0.0, f.x, u);
    if (!b.allFinite() || !f.sigma.allFinite())
        throw EvaluationError("solve_hjb: coefficient is nonfinite at a grid node");

    std::vector<Vec> gam;
    std::vector<bool> small;
    Vec beff = b;
    for (const auto& a : spec.levy.atoms()) {
        gam.push_back(c.jump(0.0, a.mark, f.x, u));
        if (!gam.back().allFinite()) throw EvaluationError("solve_hjb: jump coefficient is nonfinite");
        small.push_back(a.mark.norm() < delta);
        if (!small.back()) beff -= a.rate * gam.back();
    }

    // First differences, upwinded by the effective drift.
    for (std::size_t k = 0; k < n; ++k) {
        const double h = grid.h(k);
        const std::size_t cnt = grid.axis(k).count;
        const double dir = beff(static_cast<Eigen::Index>(k));
        const bool can_fwd = m[k] + 1 < cnt, can_bwd = m[k] > 0;
        Row& r = f.D[k];
        if ((dir > 0.0 && can_fwd) || !can_bwd) {
            r.add(shifted(grid, node, k, 1), 1.0 / h);
            r.add(node, -1.0 / h);
        } else if ((dir < 0.0 && can_bwd) || !can_fwd) {
            r.add(node, 1.0 / h);
            r.add(shifted(grid, node, k, -1), -1.0 / h);
        } else {
            r.add(shifted(grid, node, k, 1), 0.5 / h);
            r.add(shifted(grid, node, k, -1), -0.5 / h);
        }
    }
    // Second differences; the centre moves inwards at the boundary.
    auto centred = [&](std::size_t k) {
        const std::size_t cnt = grid.axis(k).count;
        return static_cast<long>(std::clamp<std::size_t>(m[k], 1, cnt - 2)) - static_cast<long>(m[k]);
    };
    for (std::size_t k = 0; k < n; ++k) {
        const double h2 = grid.h(k) * grid.h(k);
        const long o = centred(k);
        Row& r = f.D2[k][k];
        r.add(shifted(grid, node, k, o - 1), 1.0 / h2);
        r.add(shifted(grid, node, k, o), -2.0 / h2);
        r.add(shifted(grid, node, k, o + 1), 1.0 / h2);
    }
    if (n == 2) {
        const long o0 = centred(0), o1 = centred(1);
        const double s = 1.0 / (4.0 * grid.h(0) * grid.h(1));
        auto at = [&](long a, long b2) {
            auto mm = m;
            mm[0] = static_cast<std::size_t>(static_cast<long>(mm[0]) + o0 + a);
            mm[1] = static_cast<std::size_t>(static_cast<long>(mm[1]) + o1 + b2);
            return grid.flat_index(mm);
        };
        Row& r = f.D2[0][1];
        r.add(at(1, 1), s);
        r.add(at(1, -1), -s);
        r.add(at(-1, 1), -s);
        r.add(at(-1, -1), s);
        f.D2[1][0] = r;
    }

    const Mat a = f.sigma * f.sigma.transpose();
    for (std::size_t k = 0; k < n; ++k) {
        f.L.add(f.D[k], b(static_cast<Eigen::Index>(k)));
        for (std::size_t l = 0; l < n; ++l)
            f.L.add(f.D2[k][l], 0.5 * a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)));
    }
    f.G.resize(spec.noise_dim);
    for (std::size_t j = 0; j < spec.noise_dim; ++j)
        for (std::size_t k = 0; k < n; ++k)
            f.G[j].add(f.D[k], f.sigma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));

    for (std::size_t j = 0; j < spec.levy.size(); ++j) {
        const auto& atom = spec.levy.atom(j);
        const double rho = c.rho(atom.mark);
        const Vec& g = gam[j];
        if (small[j]) {
            for (std::size_t k = 0; k < n; ++k) {
                const double gk = g(static_cast<Eigen::Index>(k));
                for (std::size_t l = 0; l < n; ++l)
                    f.B.add(f.D2[k][l], 0.5 * atom.rate * gk * g(static_cast<Eigen::Index>(l)));
                f.C.add(f.D[k], atom.rate * rho * gk);
            }
        } else {
            const Vec target = f.x + g;
            ++f.lookups;
            if (!grid.in_extended_domain(target)) ++f.escapes;
            const Stencil st = grid.interpolation(target);
            f.B.add(st, atom.rate);
            f.B.add(node, -atom.rate);
            for (std::size_t k = 0; k < n; ++k) f.B.add(f.D[k], -atom.rate * g(static_cast<Eigen::Index>(k)));
            f.C.add(st, atom.rate * rho);
            f.C.add(node, -atom.rate * rho);
        }
    }
    return f;
}

struct FormValues {
    double Lv, Bv, Cv;
    Vec z;
};

FormValues apply_forms(const Forms& f, std::span<const double> v) {
    FormValues r{f.L.apply(v), f.B.apply(v), f.C.apply(v), Vec(static_cast<Eigen::Index>(f.G.size()))};
    for (std::size_t k = 0; k < f.G.size(); ++k) r.z(static_cast<Eigen::Index>(k)) = f.G[k].apply(v);
    return r;
}

double hamiltonian_of(const ProblemSpec& spec, const Forms& f, std::span<const double> v, std::size_t node) {
    const auto r = apply_forms(f, v);
    const double h = r.Lv + r.Bv + spec.coeffs.driver(0.0, f.x, v[node], r.z, r.Cv, f.u);
    if (!std::isfinite(h)) throw EvaluationError("hamiltonian: nonfinite value");
    return h;
}

void require_autonomous(const ProblemSpec& spec, const char* who) {
    if (!spec.coeffs.autonomous)
        throw DomainError(std::string(who) + ": the stationary equation needs autonomous coefficients");
}

}  // namespace

OperatorTerms operator_terms(const ProblemSpec& spec, const StateGrid& grid, std::span<const double> values,
                             std::size_t node, const Vec& u, double delta) {
    require_autonomous(spec, "operator_terms");
    if (values.size() != grid.size()) throw DomainError("operator_terms: value array does not match the grid");
    if (node >= grid.size()) throw DomainError("operator_terms: node out of range");
    const auto f = build_forms(spec, grid, node, u, delta);
    OperatorTerms t;
    t.v = values[node];
    const auto n = static_cast<Eigen::Index>(grid.dim());
    t.Dv = Vec(n);
    t.D2v = Mat(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        t.Dv(k) = f.D[static_cast<std::size_t>(k)].apply(values);
        for (Eigen::Index l = 0; l < n; ++l)
            t.D2v(k, l) = f.D2[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)].apply(values);
    }
    const auto r = apply_forms(f, values);
    t.Lv = r.Lv;
    t.Bv = r.Bv;
    t.Cv = r.Cv;
    t.escapes = f.escapes;
    return t;
}

double hamiltonian(const ProblemSpec& spec, const StateGrid& grid, std::span<const double> values,
                   std::size_t node, const Vec& u, double delta) {
    require_autonomous(spec, "hamiltonian");
    if (values.size() != grid.size()) throw DomainError("hamiltonian: value array does not match the grid");
    if (node >= grid.size()) throw DomainError("hamiltonian: node out of range");
    return hamiltonian_of(spec, build_forms(spec, grid, node, u, delta), values, node);
}

HamiltonianEval evaluate_hamiltonian(const ProblemSpec& spec, const StateGrid& grid,
                                     std::span<const double> values, std::size_t node, double delta) {
    HamiltonianEval e;
    e.x = grid.point(node);
    e.v = values[node];
    for (std::size_t i = 0; i < spec.controls.size(); ++i) {
        const auto t = operator_terms(spec, grid, values, node, spec.controls[i], delta);
        if (i == 0) {
            e.Dv = t.Dv;
            e.D2v = t.D2v;
        }
        e.Bv.push_back(t.Bv);
        e.Cv.push_back(t.Cv);
        e.H.push_back(hamiltonian(spec, grid, values, node, spec.controls[i], delta));
    }
    e.argmax = argmax_lowest(e.H);
    return e;
}

namespace {

/// Newton iteration on the frozen-policy equation F(v) = 0.
void evaluate_policy(const ProblemSpec& spec, const std::vector<const Forms*>& forms, std::vector<double>& v,
                     double tol) {
    const std::size_t G = v.size();
    const auto& f = spec.coeffs.driver;
    auto residual = [&](std::span<const double> w, std::vector<double>& out) {
        double worst = 0.0;
        for (std::size_t i = 0; i < G; ++i) {
            out[i] = hamiltonian_of(spec, *forms[i], w, i);
            worst = std::max(worst, std::abs(out[i]));
        }
        return worst;
    };
    std::vector<double> F(G), trial(G), Ft(G);
    double norm = residual(v, F);
    for (int it = 0; it < 50 && norm > tol; ++it) {
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t i = 0; i < G; ++i) {
            const Forms& fm = *forms[i];
            const auto r = apply_forms(fm, v);
            const double y = v[i];
            auto drv = [&](double yy, const Vec& zz, double kk) { return f(0.0, fm.x, yy, zz, kk, fm.u); };
            const double ey = 1e-6 * (1.0 + std::abs(y));
            const double fy = (drv(y + ey, r.z, r.Cv) - drv(y - ey, r.z, r.Cv)) / (2.0 * ey);
            const double ek = 1e-6 * (1.0 + std::abs(r.Cv));
            const double fk = (drv(y, r.z, r.Cv + ek) - drv(y, r.z, r.Cv - ek)) / (2.0 * ek);
            std::map<std::size_t, double> row;
            for (const auto& [j, w] : fm.L.entries()) row[j] += w;
            for (const auto& [j, w] : fm.B.entries()) row[j] += w;
            for (const auto& [j, w] : fm.C.entries()) row[j] += fk * w;
            row[i] += fy;
            for (std::size_t k = 0; k < fm.G.size(); ++k) {
                Vec zp = r.z, zm = r.z;
                const double ez = 1e-6 * (1.0 + std::abs(r.z(static_cast<Eigen::Index>(k))));
                zp(static_cast<Eigen::Index>(k)) += ez;
                zm(static_cast<Eigen::Index>(k)) -= ez;
                const double fz = (drv(y, zp, r.Cv) - drv(y, zm, r.Cv)) / (2.0 * ez);
                if (fz != 0.0)
                    for (const auto& [j, w] : fm.G[k].entries()) row[j] += fz * w;
            }
            for (const auto& [j, w] : row)
                if (w != 0.0) trips.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
        }
        Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(G));
        J.setFromTriplets(trips.begin(), trips.end());
        J.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(J);
        lu.factorize(J);
        if (lu.info() != Eigen::Success)
            throw DiscretizationError("solve_hjb: frozen-policy system is singular (" + lu.lastErrorMessage() + ")");
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(G));
        for (std::size_t i = 0; i < G; ++i) rhs(static_cast<Eigen::Index>(i)) = -F[i];
        const Eigen::VectorXd step = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !step.allFinite())
            throw DiscretizationError("solve_hjb: frozen-policy solve failed");
        // Damped update: halve the step while the residual grows.
        double scale = 1.0;
        double tnorm = 0.0;
        for (int b = 0; b < 20; ++b) {
            for (std::size_t i = 0; i < G; ++i) trial[i] = v[i] + scale * step(static_cast<Eigen::Index>(i));
            tnorm = residual(trial, Ft);
            if (tnorm <= norm) break;
            scale *= 0.5;
        }
        v.swap(trial);
        F.swap(Ft);
        norm = tnorm;
    }
}

}  // namespace

DiscreteValueFunction solve_hjb(const ProblemSpec& spec, const StateGrid& grid, const HjbOptions& options) {
    require_autonomous(spec, "solve_hjb");
    if (grid.dim() != spec.state_dim) throw DomainError("solve_hjb: grid dimension does not match the state");
    if (!(options.tol > 0.0)) throw DomainError("solve_hjb: tol must be positive");
    if (!(options.delta >= 0.0)) throw DomainError("solve_hjb: delta must be nonnegative");
    if (options.max_iters < 1) throw DomainError("solve_hjb: max_iters must be >= 1");

    DiscreteValueFunction V;
    V.grid = grid;
    const std::size_t G = grid.size(), U = spec.controls.size();
    if (!certify(spec, 2.0).passes_all())
        V.warnings.push_back("dissipativity certificate fails at p = 2; the stationary solve may be ill-posed");

    std::vector<Forms> forms(G * U);
    parallel_for(G, options.workers, [&](std::size_t i) {
        for (std::size_t u = 0; u < U; ++u) forms[i * U + u] = build_forms(spec, grid, i, spec.controls[u], options.delta);
    });
    std::size_t escapes = 0, lookups = 0;
    for (const auto& f : forms) {
        escapes += f.escapes;
        lookups += f.lookups;
    }
    V.escape_fraction = lookups ? static_cast<double>(escapes) / static_cast<double>(lookups) : 0.0;
    if (V.escape_fraction > 0.01) {
        std::ostringstream os;
        os << "jump targets escape the extended domain in " << 100.0 * V.escape_fraction << "% of evaluations";
        V.warnings.push_back(os.str());
    }

    std::vector<std::size_t> policy = options.initial_policy;
    if (policy.empty()) policy.assign(G, 0);
    if (policy.size() != G) throw DomainError("solve_hjb: initial policy has the wrong size");
    for (auto p : policy)
        if (p >= U) throw DomainError("solve_hjb: initial policy index out of range");

    V.values.assign(G, 0.0);
    V.residual.assign(G, 0.0);
    std::vector<double> H(G * U);
    for (std::size_t it = 1; it <= options.max_iters; ++it) {
        std::vector<const Forms*> frozen(G);
        for (std::size_t i = 0; i < G; ++i) frozen[i] = &forms[i * U + policy[i]];
        evaluate_policy(spec, frozen, V.values, options.tol / 10.0);
        if (options.keep_history) V.history.push_back(V.values);

        std::vector<std::size_t> next(G);
        parallel_for(G, options.workers, [&](std::size_t i) {
            for (std::size_t u = 0; u < U; ++u) H[i * U + u] = hamiltonian_of(spec, forms[i * U + u], V.values, i);
            const std::span<const double> row(&H[i * U], U);
            next[i] = argmax_lowest(row);
            V.residual[i] = row[next[i]];
        });
        V.iterations = it;
        const bool stable = next == policy;
        policy = std::move(next);
        if (stable && V.max_residual() <= options.tol) {
            V.policy = std::move(policy);
            return V;
        }
    }
    std::ostringstream os;
    os << "solve_hjb: no convergence after " << options.max_iters << " iterations (max residual "
       << V.max_residual() << ")";
    throw ConvergenceError(os.str(), V.residual);
}

ValueProperties value_properties(const DiscreteValueFunction& V) {
    const auto& g = V.grid;
    if (V.values.size() != g.size()) throw DomainError("value_properties: value array does not match the grid");
    ValueProperties r;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec x = g.point(i);
        r.growth_hat = std::max(r.growth_hat, std::abs(V.values[i]) / (1.0 + x.norm()));
        const auto m = g.multi_index(i);
        for (std::size_t k = 0; k < g.dim(); ++k)
            if (m[k] + 1 < g.axis(k).count)
                r.lipschitz_hat =
                    std::max(r.lipschitz_hat, std::abs(V.values[shifted(g, i, k, 1)] - V.values[i]) / g.h(k));
    }
    // Smallest eigenvalue of the discrete Hessian over interior nodes.
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto m = g.multi_index(i);
        bool interior = true;
        for (std::size_t k = 0; k < g.dim(); ++k) interior = interior && m[k] > 0 && m[k] + 1 < g.axis(k).count;
        if (!interior) continue;
        auto v = [&](std::size_t k, long o) { return V.values[shifted(g, i, k, o)]; };
        const double hxx = (v(0, -1) - 2.0 * V.values[i] + v(0, 1)) / (g.h(0) * g.h(0));
        if (g.dim() == 1) {
            lowest = std::min(lowest, hxx);
            continue;
        }
        const double hyy = (v(1, -1) - 2.0 * V.values[i] + v(1, 1)) / (g.h(1) * g.h(1));
        auto at = [&](long a, long b) {
            auto mm = m;
            mm[0] = static_cast<std::size_t>(static_cast<long>(mm[0]) + a);
            mm[1] = static_cast<std::size_t>(static_cast<long>(mm[1]) + b);
            return V.values[g.flat_index(mm)];
        };
        const double hxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * g.h(0) * g.h(1));
        const double mean = 0.5 * (hxx + hyy);
        const double rad = std::sqrt(0.25 * (hxx - hyy) * (hxx - hyy) + hxy * hxy);
        lowest = std::min(lowest, mean - rad);
    }
    if (std::isfinite(lowest)) r.semiconvexity_kappa_hat = std::max(0.0, -0.5 * lowest);
    return r;
}

DppReport dpp_check(const ProblemSpec& spec, const DiscreteValueFunction& V, double t, const Vec& x,
                    const std::vector<NamedPolicy>& family, const Numerics& numerics) {
    if (!(t > 0.0)) throw DomainError("dpp_check: t must be positive");
    if (family.empty()) throw DomainError("dpp_check: the policy family is empty");
    DppReport r;
    r.lhs = V.value_at(x);
    const TimeGrid grid(0.0, t, std::min(numerics.dt, t));
    SimulationOptions sim;
    sim.substeps = numerics.substeps;
    sim.workers = numerics.workers;
    sim.record_jumps = false;
    auto opt = numerics.bsde;
    opt.workers = numerics.workers;
    opt.terminal = [&V](const Vec& y) { return V.value_at(y); };
    if (opt.method == BsdeMethod::markovian && opt.grid.size() == 0) opt.grid = V.grid;
    r.rhs = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> costs;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto ens = simulate_forward(spec, family[i].law, x, grid, numerics.paths, numerics.seed, sim);
        const auto sol = solve_bsde(spec, family[i].law, ens, opt);
        r.semigroup.push_back(sol.y0);
        costs.push_back(sol.pathwise_cost);
        if (sol.y0.value > r.rhs) {
            r.rhs = sol.y0.value;
            r.argmax = i;
        }
    }
    r.gap = r.lhs - r.rhs;
    r.gap_se = r.semigroup[r.argmax].se;
    const auto& best = costs[r.argmax];
    for (std::size_t i = 0; i < family.size(); ++i) {
        std::vector<double> diff;
        for (std::size_t p = 0; p < best.size() && p < costs[i].size(); ++p)
            if (std::isfinite(best[p]) && std::isfinite(costs[i][p])) diff.push_back(best[p] - costs[i][p]);
        r.paired_se.push_back(diff.size() > 1 ? mean_and_se(diff).se : 0.0);
    }
    r.first_attains = r.semigroup[0].value >= r.rhs - 3.0 * r.paired_se[0] - 1e-12 * (1.0 + std::abs(r.rhs));
    return r;
}

}  // namespace jumpctl
