#include "jumpctl/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace jumpctl {

namespace {

/// JSON has no infinities or NaN; they become null.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vec_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

double mean_finite(const std::vector<double>& v, std::size_t stride, std::size_t offset, std::size_t count,
                   double& se) {
    std::vector<double> x;
    for (std::size_t i = 0; i < count; ++i) {
        const double a = v[i * stride + offset];
        if (std::isfinite(a)) x.push_back(a);
    }
    if (x.empty()) {
        se = NAN;
        return NAN;
    }
    const auto e = mean_and_se(x);
    se = e.se;
    return e.value;
}

}  // namespace

Json to_json(const Estimate& e) { return {{"value", num(e.value)}, {"se", num(e.se)}}; }

Json to_json(const DissipativityCertificate& c) {
    return {{"p", c.p},
            {"c_p", num(c.c_p)},
            {"L_gamma_2", num(c.L_gamma_2)},
            {"L_gamma_p", num(c.L_gamma_p)},
            {"eta_bp", num(c.eta_bp)},
            {"eta_b2", num(c.eta_b2)},
            {"alpha_f_bar", num(c.alpha_f_bar)},
            {"rho_norm_2", num(c.rho_norm_2)},
            {"passes_C1p", c.passes_C1p},
            {"passes_C2", c.passes_C2},
            {"passes_C3", c.passes_C3},
            {"passes_C4", c.passes_C4},
            {"passes_C4_weak", c.passes_C4_weak},
            {"passes_all", c.passes_all()},
            {"notes", c.notes}};
}

Json to_json(const ViolationReport& r) {
    Json list = Json::array();
    for (const auto& v : r.violations)
        list.push_back({{"inequality", v.inequality},
                        {"x", vec_json(v.x)},
                        {"x_prime", vec_json(v.x_prime)},
                        {"control", v.control},
                        {"lhs", num(v.lhs)},
                        {"rhs", num(v.rhs)}});
    return {{"samples", r.samples}, {"violation_count", r.violations.size()}, {"violations", list}};
}

Json to_json(const AdmissibilityEstimate& a) { return {{"pi1", to_json(a.pi1)}, {"pi2", to_json(a.pi2)}}; }

Json to_json(const LpNormEstimates& e) {
    return {{"sup", to_json(e.sup)}, {"integral_p", to_json(e.integral_p)}, {"integral_2", to_json(e.integral_2)}};
}

Json to_json(const DecayReport& r) {
    return {{"bounded", r.bounded},
            {"sup_witness", num(r.sup_witness)},
            {"early_sup", num(r.early_sup)},
            {"late_sup", num(r.late_sup)},
            {"rate", num(r.rate)}};
}

Json to_json(const ContinuousDependenceReport& r) {
    return {{"ratio", to_json(r.ratio)}, {"sup_term", to_json(r.sup_term)}, {"integral_term", to_json(r.integral_term)}};
}

Json to_json(const PoissonMomentReport& r) {
    return {{"sup_moment", to_json(r.sup_moment)},
            {"terminal_moment", to_json(r.terminal_moment)},
            {"rhs", num(r.rhs)},
            {"ratio", num(r.ratio)}};
}

Json to_json(const ComparisonReport& r) {
    return {{"holds", r.holds},
            {"y1", to_json(r.y1)},
            {"y2", to_json(r.y2)},
            {"gap_se", num(r.gap_se)},
            {"worst_gap", num(r.worst_gap)}};
}

Json to_json(const AprioriReport& r) {
    return {{"sup_y", to_json(r.sup_y)}, {"int_y", to_json(r.int_y)}, {"int_z", to_json(r.int_z)},
            {"int_k", to_json(r.int_k)}, {"lhs", num(r.lhs)},         {"rhs", num(r.rhs)},
            {"ratio", num(r.ratio)}};
}

Json to_json(const PicardReport& r) {
    Json d = Json::array();
    for (double v : r.sweep_differences) d.push_back(num(v));
    return {{"sweep_differences", d}, {"contraction_factor", num(r.contraction_factor)}};
}

Json to_json(const ValueProperties& p) {
    return {{"lipschitz_hat", num(p.lipschitz_hat)},
            {"growth_hat", num(p.growth_hat)},
            {"semiconvexity_kappa_hat", num(p.semiconvexity_kappa_hat)}};
}

Json to_json(const DppReport& r) {
    Json s = Json::array();
    for (const auto& e : r.semigroup) s.push_back(to_json(e));
    Json ps = Json::array();
    for (double v : r.paired_se) ps.push_back(num(v));
    return {{"lhs", num(r.lhs)},       {"rhs", num(r.rhs)},         {"gap", num(r.gap)},
            {"gap_se", num(r.gap_se)}, {"argmax", r.argmax},        {"semigroup", s},
            {"paired_se", ps},         {"first_attains", r.first_attains}};
}

Json to_json(const VerificationReport& r) {
    Json sub = Json::array();
    for (const auto& s : r.suboptimal_J) sub.push_back({{"name", s.name}, {"J", to_json(s.estimate)}});
    Json cond = Json::array();
    for (const auto& c : r.conditions)
        cond.push_back({{"name", c.name},
                        {"passed", c.passed},
                        {"discrepancy", num(c.discrepancy)},
                        {"tolerance", num(c.tolerance)},
                        {"detail", c.detail}});
    return {{"W_at_x", num(r.W_at_x)},
            {"J_closed_loop", to_json(r.J_closed_loop)},
            {"suboptimal_J", sub},
            {"conditions", cond},
            {"exclusion_fraction", num(r.exclusion_fraction)},
            {"coverage_miss", num(r.coverage_miss)},
            {"verdict", r.optimal_consistent ? "optimal-consistent" : "not-verified"}};
}

void write_ensemble_csv(std::ostream& os, const PathEnsemble& ens, const ProblemSpec& spec, std::size_t max_paths) {
    os << std::setprecision(17) << "time,path";
    for (std::size_t k = 0; k < ens.state_dim(); ++k) os << ",x" << k;
    const auto cdim = static_cast<std::size_t>(spec.controls[0].size());
    for (std::size_t k = 0; k < cdim; ++k) os << ",u" << k;
    os << '\n';
    const std::size_t count = std::min(max_paths, ens.paths());
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t i = 0; i < ens.grid().nodes(); ++i) {
            os << ens.grid().time(i) << ',' << p;
            for (std::size_t k = 0; k < ens.state_dim(); ++k) os << ',' << ens.state(p, i, k);
            const Vec& u = spec.controls[ens.control(p, i)];
            for (std::size_t k = 0; k < cdim; ++k) os << ',' << u(static_cast<Eigen::Index>(k));
            os << '\n';
        }
}

void write_moment_csv(std::ostream& os, const std::vector<MomentPoint>& curve) {
    os << std::setprecision(17) << "time,value,se\n";
    for (const auto& p : curve) os << p.time << ',' << p.value << ',' << p.se << '\n';
}

void write_bsde_csv(std::ostream& os, const BsdeSolution& sol) {
    os << std::setprecision(17) << "time,Y_mean,Y_se";
    for (std::size_t k = 0; k < sol.noise_dim; ++k) os << ",Z_mean_" << k;
    for (std::size_t j = 0; j < sol.atoms; ++j) os << ",K_atom_" << j;
    os << '\n';
    const std::size_t nodes = sol.grid.nodes();
    for (std::size_t i = 0; i < nodes; ++i) {
        double se = 0.0;
        const double y = mean_finite(sol.Y, nodes, i, sol.paths, se);
        os << sol.grid.time(i) << ',' << y << ',' << se;
        for (std::size_t k = 0; k < sol.noise_dim; ++k) {
            double s;
            os << ',' << mean_finite(sol.Z, nodes * sol.noise_dim, i * sol.noise_dim + k, sol.paths, s);
        }
        for (std::size_t j = 0; j < sol.atoms; ++j) {
            double s;
            os << ',' << mean_finite(sol.K, nodes * sol.atoms, i * sol.atoms + j, sol.paths, s);
        }
        os << '\n';
    }
}

void write_value_csv(std::ostream& os, const DiscreteValueFunction& V) {
    os << std::setprecision(17);
    for (std::size_t k = 0; k < V.grid.dim(); ++k) os << 'x' << k << ',';
    os << "value,policy_index,residual\n";
    for (std::size_t i = 0; i < V.grid.size(); ++i) {
        const Vec x = V.grid.point(i);
        for (Eigen::Index k = 0; k < x.size(); ++k) os << x(k) << ',';
        os << V.values[i] << ',' << (i < V.policy.size() ? V.policy[i] : 0) << ','
           << (i < V.residual.size() ? V.residual[i] : 0.0) << '\n';
    }
}

}  // namespace jumpctl
