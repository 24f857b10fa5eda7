#include "jumpctl/verify.hpp"

#include "jumpctl/parallel.hpp"
#include "jumpctl/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace jumpctl {

FeedbackPolicy::FeedbackPolicy(StateGrid grid, std::vector<std::size_t> indices)
    : grid_(std::move(grid)), indices_(std::make_shared<const std::vector<std::size_t>>(std::move(indices))) {
    if (indices_->size() != grid_.size()) throw DomainError("FeedbackPolicy: one index per grid node required");
}

ControlLaw FeedbackPolicy::law() const {
    return [self = *this](double, const Vec& x) { return self(x); };
}

FeedbackPolicy feedback_argmax(const ProblemSpec& spec, const DiscreteValueFunction& W, double delta) {
    std::vector<std::size_t> idx(W.grid.size());
    for (std::size_t i = 0; i < W.grid.size(); ++i) {
        std::vector<double> h(spec.controls.size());
        for (std::size_t u = 0; u < h.size(); ++u) h[u] = hamiltonian(spec, W.grid, W.values, i, spec.controls[u], delta);
        idx[i] = argmax_lowest(h);
    }
    return FeedbackPolicy(W.grid, std::move(idx));
}

std::vector<NamedPolicy> random_feedback_policies(const ProblemSpec& spec, const StateGrid& grid,
                                                  std::size_t count, std::uint64_t seed) {
    std::vector<NamedPolicy> out;
    const std::size_t U = spec.controls.size();
    for (std::size_t i = 0; i < count; ++i) {
        Stream s(seed, i, salt::policies);
        const auto blocks = 1 + static_cast<std::size_t>(s.uniform() * 8.0) % 8;
        std::vector<std::size_t> choice(blocks);
        for (auto& c : choice) c = static_cast<std::size_t>(s.uniform() * static_cast<double>(U)) % U;
        std::vector<std::size_t> idx(grid.size());
        const std::size_t n0 = grid.axis(0).count;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const std::size_t along = grid.multi_index(g)[0];
            idx[g] = choice[std::min(blocks - 1, along * blocks / n0)];
        }
        out.push_back({"random-" + std::to_string(i), FeedbackPolicy(grid, std::move(idx)).law()});
    }
    return out;
}

const ConditionCheck& VerificationReport::condition(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.name == name) return c;
    throw DomainError("VerificationReport: no condition named '" + name + "'");
}

VerificationReport classical_verification(const ProblemSpec& spec, const DiscreteValueFunction& W, const Vec& x0,
                                          const std::vector<NamedPolicy>& sampled, const Numerics& numerics,
                                          const ClassicalOptions& options) {
    VerificationReport r;
    r.W_at_x = W.value_at(x0);
    auto num = numerics;
    if (num.bsde.method == BsdeMethod::markovian && num.bsde.grid.size() == 0) num.bsde.grid = W.grid;
    const auto policy = feedback_argmax(spec, W, options.delta);
    r.J_closed_loop = cost_J(spec, policy.law(), x0, num);

    ConditionCheck dom{"dominance", true, 0.0, 3.0, {}};
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& p : sampled) {
        const auto j = cost_J(spec, p.law, x0, num);
        r.suboptimal_J.push_back({p.name, j});
        // Excess of J over W in units of its SE (or absolute when SE is 0).
        const double excess = j.value - r.W_at_x;
        const double score = j.se > 0.0 ? excess / j.se : (excess > 1e-12 ? HUGE_VAL : 0.0);
        if (score > worst) {
            worst = score;
            dom.detail = p.name;
        }
        if (!(r.W_at_x >= j.value - 3.0 * j.se - 1e-12 * (1.0 + std::abs(j.value)))) dom.passed = false;
    }
    dom.discrepancy = sampled.empty() ? 0.0 : worst;
    r.conditions.push_back(dom);

    ConditionCheck cl{"closed_loop", false, 0.0, 0.0, {}};
    cl.discrepancy = std::abs(r.W_at_x - r.J_closed_loop.value) / (1.0 + std::abs(r.W_at_x));
    cl.tolerance = options.rel_tol;
    cl.passed = cl.discrepancy <= options.rel_tol;
    r.conditions.push_back(cl);
    r.optimal_consistent = dom.passed && cl.passed;
    return r;
}

namespace {

/// Nodal Hessian entries (xx, yy, xy) with boundary rows copied inwards.
struct NodalHessian {
    std::vector<double> hxx, hyy, hxy;
};

NodalHessian nodal_hessian(const StateGrid& g, const std::vector<double>& v) {
    NodalHessian H;
    H.hxx.assign(g.size(), 0.0);
    H.hyy.assign(g.size(), 0.0);
    H.hxy.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto m = g.multi_index(i);
        std::array<std::size_t, 2> c = m;
        for (std::size_t k = 0; k < g.dim(); ++k) c[k] = std::clamp<std::size_t>(m[k], 1, g.axis(k).count - 2);
        auto at = [&](long a, long b) {
            auto mm = c;
            mm[0] = static_cast<std::size_t>(static_cast<long>(mm[0]) + a);
            if (g.dim() == 2) mm[1] = static_cast<std::size_t>(static_cast<long>(mm[1]) + b);
            return v[g.flat_index(mm)];
        };
        H.hxx[i] = (at(-1, 0) - 2.0 * at(0, 0) + at(1, 0)) / (g.h(0) * g.h(0));
        if (g.dim() == 2) {
            H.hyy[i] = (at(0, -1) - 2.0 * at(0, 0) + at(0, 1)) / (g.h(1) * g.h(1));
            H.hxy[i] = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * g.h(0) * g.h(1));
        }
    }
    return H;
}

}  // namespace

VerificationReport viscosity_condition_report(const ProblemSpec& spec, const DiscreteValueFunction& W,
                                              const ControlLaw& policy, const Vec& x0, double T,
                                              const Numerics& numerics, const ViscosityOptions& options) {
    if (!(T > 0.0)) throw DomainError("viscosity_condition_report: T must be positive");
    if (!policy) throw DomainError("viscosity_condition_report: policy is empty");
    const auto& g = W.grid;
    const std::size_t n = g.dim(), U = spec.controls.size(), J = spec.levy.size();
    const double h = g.min_h();
    const auto cert = certify(spec, 2.0);
    if (!(cert.alpha_f_bar > 0.0)) throw DomainError("viscosity_condition_report: requires alpha_f_bar > 0");
    const double T_far = T + std::log(1e4) / cert.alpha_f_bar;

    VerificationReport r;
    r.W_at_x = W.value_at(x0);
    const auto props = value_properties(W);

    // Closed-loop ensemble and its BSDE on the grid of W.
    SimulationOptions sim;
    sim.substeps = numerics.substeps;
    sim.workers = numerics.workers;
    sim.record_jumps = false;
    const TimeGrid grid(0.0, T_far, numerics.dt);
    const auto ens = simulate_forward(spec, policy, x0, grid, numerics.paths, numerics.seed, sim);
    BsdeOptions bo = numerics.bsde;
    bo.method = BsdeMethod::markovian;
    bo.grid = g;
    bo.terminal = {};
    bo.workers = numerics.workers;
    const auto sol = solve_bsde(spec, policy, ens, bo);
    r.J_closed_loop = sol.y0;

    std::size_t outside = 0, total = 0;
    for (std::size_t p = 0; p < ens.paths(); ++p) {
        if (ens.diverged(p)) continue;
        for (std::size_t i = 0; i < grid.nodes(); ++i) {
            ++total;
            if (!g.contains(ens.state(p, i))) ++outside;
        }
    }
    r.coverage_miss = total ? static_cast<double>(outside) / static_cast<double>(total) : 0.0;
    if (r.coverage_miss > options.max_coverage_miss) {
        std::ostringstream os;
        os << "viscosity_condition_report: " << 100.0 * r.coverage_miss << "% of path states leave the grid box";
        throw CoverageError(os.str());
    }

    // Kinks: nodes whose second difference is large against the slope scale.
    std::vector<Vec> kinks;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto m = g.multi_index(i);
        for (std::size_t k = 0; k < n; ++k) {
            if (m[k] == 0 || m[k] + 1 == g.axis(k).count) continue;
            auto mm = m;
            mm[k] = m[k] - 1;
            const double lo = W.values[g.flat_index(mm)];
            mm[k] = m[k] + 1;
            const double hi = W.values[g.flat_index(mm)];
            if (std::abs(lo - 2.0 * W.values[i] + hi) > 0.05 * g.h(k) * props.lipschitz_hat) {
                kinks.push_back(g.point(i));
                break;
            }
        }
    }
    auto near_kink = [&](const Vec& x) {
        for (const auto& k : kinks)
            if ((x - k).norm() <= 2.0 * h + 1e-12) return true;
        return false;
    };

    // Nodal Hamiltonians of W per control, interpolated along the paths.
    std::vector<std::vector<double>> Hn(U, std::vector<double>(g.size()));
    for (std::size_t u = 0; u < U; ++u)
        for (std::size_t i = 0; i < g.size(); ++i)
            Hn[u][i] = hamiltonian(spec, g, W.values, i, spec.controls[u], options.delta);
    const auto hess = nodal_hessian(g, W.values);

    std::size_t last_checked = 0;
    while (last_checked + 1 < grid.nodes() && grid.time(last_checked + 1) <= T + 1e-12) ++last_checked;

    double z_scale = 0.0, z_err = 0.0, k_scale = 0.0, k_err = 0.0;
    double worst_h = std::numeric_limits<double>::infinity(), worst_h_tol = 0.0;
    std::size_t excluded = 0, evaluated = 0, probe_fail = 0, probes = 0;
    double probe_worst = 0.0;
    const auto d = static_cast<Eigen::Index>(spec.noise_dim);
    std::vector<double> hvals;
    for (std::size_t i = 0; i <= last_checked; ++i) {
        const double t = grid.time(i);
        hvals.clear();
        for (std::size_t p = 0; p < ens.paths(); ++p) {
            if (ens.diverged(p)) continue;
            const Vec x = ens.state(p, i);
            ++evaluated;
            if (near_kink(x)) {
                ++excluded;
                continue;
            }
            const std::size_t ui = ens.control(p, i);
            const Vec& u = spec.controls[ui];
            const Vec P = g.interpolated_gradient(W.values, x);
            const Vec ps = spec.coeffs.diffusion(t, x, u).transpose() * P;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double z = sol.z(p, i, static_cast<std::size_t>(k));
                z_scale = std::max(z_scale, std::abs(z));
                z_err = std::max(z_err, std::abs(ps(k) - z));
            }
            const double w = W.value_at(x);
            for (std::size_t j = 0; j < J; ++j) {
                const Vec gam = spec.coeffs.jump(t, spec.levy.atom(j).mark, x, u);
                const double dw = W.value_at(x + gam) - w;
                const double kk = sol.k(p, i, j);
                k_scale = std::max(k_scale, std::abs(kk));
                k_err = std::max(k_err, std::abs(dw - kk));
            }
            hvals.push_back(g.interpolate(Hn[ui], x));

            // Local lower-test inequality for (P, Q) on a radius-3h stencil.
            if (p < options.probe_paths) {
                const auto st = g.interpolation(x);
                Mat Q = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
                Q(0, 0) = st.apply(hess.hxx);
                if (n == 2) {
                    Q(1, 1) = st.apply(hess.hyy);
                    Q(0, 1) = Q(1, 0) = st.apply(hess.hxy);
                }
                for (std::size_t k = 0; k < n; ++k)
                    for (int s = -3; s <= 3; ++s) {
                        if (s == 0) continue;
                        Vec dx = Vec::Zero(static_cast<Eigen::Index>(n));
                        dx(static_cast<Eigen::Index>(k)) = s * g.h(k);
                        const double lower = w + P.dot(dx) + 0.5 * dx.dot(Q * dx) - 10.0 * h * h;
                        const double short_by = lower - W.value_at(x + dx);
                        ++probes;
                        probe_worst = std::max(probe_worst, short_by);
                        if (short_by > 0.0) ++probe_fail;
                    }
            }
        }
        if (!hvals.empty()) {
            const auto e = mean_and_se(hvals);
            const double tol = 10.0 * h + 3.0 * e.se;
            if (e.value + tol < worst_h + worst_h_tol || worst_h == std::numeric_limits<double>::infinity()) {
                worst_h = e.value;
                worst_h_tol = tol;
            }
        }
    }
    r.exclusion_fraction = evaluated ? static_cast<double>(excluded) / static_cast<double>(evaluated) : 0.0;

    ConditionCheck c1{"i", probe_fail == 0, probe_worst, 10.0 * h * h, {}};
    c1.detail = std::to_string(probe_fail) + " of " + std::to_string(probes) + " probes below the lower test";
    r.conditions.push_back(c1);

    ConditionCheck c2{"ii", false, z_scale > 0.0 ? z_err / z_scale : z_err, options.rel_tol, {}};
    c2.passed = z_scale > 0.0 ? c2.discrepancy <= options.rel_tol : z_err <= 1e-12;
    r.conditions.push_back(c2);

    ConditionCheck c3{"iii", false, k_scale > 0.0 ? k_err / k_scale : k_err, options.rel_tol, {}};
    c3.passed = k_scale > 0.0 ? c3.discrepancy <= options.rel_tol : k_err <= 1e-12;
    r.conditions.push_back(c3);

    ConditionCheck c4{"iv", false, 0.0, 0.0, {}};
    if (std::isfinite(worst_h)) {
        c4.discrepancy = worst_h;
        c4.tolerance = worst_h_tol;
        c4.passed = worst_h >= -worst_h_tol;
    } else {
        c4.passed = true;
    }
    c4.detail = "minimum over time of the ensemble-mean Hamiltonian";
    r.conditions.push_back(c4);

    // Condition (v) at the far horizon against the certificate tail bound.
    std::vector<double> wT;
    for (std::size_t p = 0; p < ens.paths(); ++p)
        if (!ens.diverged(p)) wT.push_back(W.value_at(ens.state(p, grid.nodes() - 1)));
    const auto eW = mean_and_se(wT);
    const double eps = cert.eta_b2 / 10.0;
    const double decay = cert.eta_b2 > 0.0 ? std::exp(-0.5 * (cert.eta_b2 - eps) * T_far) : 1.0;
    const double bound = std::abs(W.value_at(Vec::Zero(static_cast<Eigen::Index>(n)))) +
                         props.lipschitz_hat * x0.norm() * decay + 3.0 * eW.se;
    ConditionCheck c5{"v", std::abs(eW.value) <= bound, 0.0, options.rel_tol, {}};
    c5.discrepancy = std::abs(eW.value) / std::max(std::abs(r.W_at_x), 1e-12);
    c5.passed = c5.passed && c5.discrepancy <= options.rel_tol;
    {
        std::ostringstream os;
        os << "E[W(X_T)] = " << eW.value << " at T = " << T_far << ", tail bound " << bound;
        c5.detail = os.str();
    }
    r.conditions.push_back(c5);

    r.optimal_consistent = r.exclusion_fraction <= options.rel_tol;
    for (const auto& c : r.conditions) r.optimal_consistent = r.optimal_consistent && c.passed;
    return r;
}

}  // namespace jumpctl
