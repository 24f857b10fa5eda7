#include "jumpctl/cli.hpp"

#include "jumpctl/hjb.hpp"
#include "jumpctl/verify.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace jumpctl::cli {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

/// Accumulates the pieces of one run.
struct Context {
    Context(const ExperimentConfig& c, ProblemSpec s) : cfg(c), spec(std::move(s)) {}

    const ExperimentConfig& cfg;
    ProblemSpec spec;
    Json report = Json::object();
    Json headline = Json::object();
    Json assertions = Json::array();
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> tables;  // file name, body

    void check(const std::string& name, bool passed, const std::string& detail = {}) {
        assertions.push_back({{"name", name}, {"passed", passed}, {"detail", detail}});
    }
    void table(const std::string& name, const std::string& body) { tables.emplace_back(name, body); }
    void warn(const std::string& w) { warnings.push_back(w); }
};

Vec point(double x) { return vec({x}); }

std::string control_name(const ProblemSpec& spec, std::size_t i) { return "u=" + fmt(spec.controls[i](0)); }

// ---------------------------------------------------------------------------

void run_certify(Context& c) {
    std::ostringstream csv;
    csv << std::setprecision(17)
        << "p,c_p,L_gamma_2,L_gamma_p,eta_bp,eta_b2,alpha_f_bar,rho_norm_2,passes_C1p,passes_C2,passes_C3,"
           "passes_C4,passes_C4_weak\n";
    Json certs = Json::array();
    for (double p : c.cfg.certify.p) {
        const auto cert = certify(c.spec, p);
        Json j = to_json(cert);
        if (cert.eta_bp > 0.0) j["truncation_horizon"] = truncation_horizon(cert.eta_bp, p);
        certs.push_back(j);
        c.headline["eta_bp[p=" + fmt(p) + "]"] = num(cert.eta_bp);
        c.headline["c_p[p=" + fmt(p) + "]"] = num(cert.c_p);
        std::string notes;
        for (const auto& n : cert.notes) notes += (notes.empty() ? "" : "; ") + n;
        c.check("certificate[p=" + fmt(p) + "]", cert.passes_all(), notes);
        csv << p << ',' << cert.c_p << ',' << cert.L_gamma_2 << ',' << cert.L_gamma_p << ',' << cert.eta_bp << ','
            << cert.eta_b2 << ',' << cert.alpha_f_bar << ',' << cert.rho_norm_2 << ',' << cert.passes_C1p << ','
            << cert.passes_C2 << ',' << cert.passes_C3 << ',' << cert.passes_C4 << ',' << cert.passes_C4_weak
            << '\n';
    }
    c.report["certificates"] = certs;
    c.headline["alpha_f_bar"] = num(certify(c.spec, 2.0).alpha_f_bar);
    c.table("certify.csv", csv.str());

    if (c.cfg.certify.samples > 0) {
        Stream stream(c.cfg.seed, 0, salt::validation);
        const StateBox box{point(c.cfg.grid.axis(0).lo), point(c.cfg.grid.axis(0).hi)};
        const auto vr = validate_declared_constants(c.spec, c.cfg.certify.samples, box, stream);
        c.report["declared_constants"] = to_json(vr);
        c.headline["violations"] = vr.violations.size();
        c.check("declared_constants", vr.empty(), std::to_string(vr.violations.size()) + " violations");
        std::ostringstream v;
        v << std::setprecision(17) << "inequality,x,x_prime,control,lhs,rhs\n";
        for (const auto& w : vr.violations)
            v << w.inequality << ',' << w.x(0) << ',' << (w.x_prime.size() ? w.x_prime(0) : NAN) << ','
              << w.control << ',' << w.lhs << ',' << w.rhs << '\n';
        c.table("violations.csv", v.str());
    }
}

void run_simulate(Context& c) {
    const auto& s = c.cfg.simulate;
    const auto& n = c.cfg.numerics;
    const TimeGrid grid(0.0, n.T, n.dt);
    SimulationOptions opts;
    opts.substeps = n.substeps;
    opts.workers = c.cfg.workers;
    const auto law = constant_control(s.control);
    const auto ens = simulate_forward(c.spec, law, point(c.cfg.x0), grid, n.paths, c.cfg.seed, opts);
    const auto curve = moment_curve(ens, s.p);
    const auto lp = lp_norm_estimates(ens, s.p);

    const auto probe = std::min(grid.intervals(), static_cast<std::size_t>(std::llround(s.probe_time / grid.dt())));
    c.headline["probe_time"] = grid.time(probe);
    c.headline["moment_at_probe"] = num(curve[probe].value);
    c.headline["moment_at_probe_se"] = num(curve[probe].se);
    c.headline["terminal_moment"] = num(curve.back().value);
    c.headline["lp_sup"] = num(lp.sup.value);
    c.headline["lp_integral_p"] = num(lp.integral_p.value);
    c.headline["diverged"] = ens.diverged_count();
    c.report["lp_norms"] = to_json(lp);
    c.report["diverged_paths"] = ens.diverged_count();
    if (c.cfg.family != "OU-DECAY") {
        const double u = c.spec.controls[s.control](0);
        c.report["moment_closed_form"] =
            std::pow(std::abs(c.cfg.x0), s.p) * std::exp(lin1_moment_rate(c.cfg.lin1, s.p, u) * grid.time(probe));
    }

    const auto cert = certify(c.spec, s.p);
    if (cert.eta_bp > s.epsilon) {
        const auto d = decay_rate_check(curve, cert.eta_bp, s.epsilon, s.p);
        c.report["decay"] = to_json(d);
        c.headline["decay_sup_witness"] = num(d.sup_witness);
        c.check("decay_bounded", d.bounded,
                "early " + fmt(d.early_sup) + ", late " + fmt(d.late_sup) + ", rate " + fmt(d.rate));
    } else {
        c.warn("decay check skipped: eta_bp = " + fmt(cert.eta_bp) + " does not exceed epsilon");
    }
    if (s.admissibility) {
        const auto a = admissibility_functionals(c.spec, law, point(c.cfg.x0), s.p, grid, n.paths, c.cfg.seed,
                                                 c.cfg.workers);
        c.report["admissibility"] = to_json(a);
        c.headline["pi1"] = num(a.pi1.value);
        c.headline["pi2"] = num(a.pi2.value);
    }

    std::ostringstream m;
    write_moment_csv(m, curve);
    c.table("moments.csv", m.str());
    if (s.csv_paths > 0) {
        std::ostringstream p;
        write_ensemble_csv(p, ens, c.spec, s.csv_paths);
        c.table("paths.csv", p.str());
    }
}

void run_bsde(Context& c) {
    const auto& b = c.cfg.bsde;
    const auto& n = c.cfg.numerics;
    const TimeGrid grid(0.0, n.T, n.dt);
    SimulationOptions opts;
    opts.substeps = n.substeps;
    opts.workers = c.cfg.workers;
    const auto law = constant_control(b.control);
    const auto ens = simulate_forward(c.spec, law, point(c.cfg.x0), grid, n.paths, c.cfg.seed, opts);

    if (c.cfg.family == "OU-DECAY")
        c.report["y0_closed_form"] = ou_decay_y(c.cfg.ou, 0.0);
    else
        c.report["y0_closed_form"] = lin1_constant_cost(c.cfg.lin1, c.cfg.x0, c.spec.controls[b.control](0));

    std::vector<BsdeMethod> methods;
    if (b.backends != "markovian") methods.push_back(BsdeMethod::lsmc);
    if (b.backends != "lsmc") methods.push_back(BsdeMethod::markovian);
    std::vector<Estimate> y0;
    for (auto m : methods) {
        BsdeOptions o = n.bsde;
        o.method = m;
        const auto sol = solve_bsde(c.spec, law, ens, o);
        const auto apriori = bsde_apriori_check(sol, ens, c.spec, b.p);
        const std::string name = method_name(m);
        c.report[name] = {{"y0", to_json(sol.y0)},
                          {"apriori", to_json(apriori)},
                          {"escape_fraction", num(sol.escape_fraction)}};
        c.headline["y0_" + name] = num(sol.y0.value);
        c.headline["y0_se_" + name] = num(sol.y0.se);
        c.headline["apriori_ratio_" + name] = num(apriori.ratio);
        c.check("apriori_finite[" + name + "]", std::isfinite(apriori.ratio), "ratio " + fmt(apriori.ratio));
        if (sol.escape_fraction > 0.01)
            c.warn(name + ": " + fmt(100.0 * sol.escape_fraction) + "% of grid lookups escaped the extended domain");
        if (b.picard) c.report[name]["picard"] = to_json(picard_diagnostic(c.spec, law, ens, o));
        std::ostringstream t;
        write_bsde_csv(t, sol);
        c.table("bsde_" + name + ".csv", t.str());
        y0.push_back(sol.y0);
    }
    if (y0.size() == 2) {
        const double gap = std::abs(y0[0].value - y0[1].value);
        const double bound = 3.0 * std::hypot(y0[0].se, y0[1].se) + 1e-12 * (1.0 + std::abs(y0[1].value));
        c.report["backend_gap"] = gap;
        c.check("backends_agree", gap <= bound, "gap " + fmt(gap) + " vs 3 combined SE " + fmt(bound));
    }
}

/// Shared by hjb, dpp and verify. Returns false (with a failed assertion)
/// when policy iteration does not converge.
bool solve_value(Context& c, DiscreteValueFunction& V) {
    HjbOptions o;
    o.delta = c.cfg.hjb.delta;
    o.tol = c.cfg.hjb.tol;
    o.max_iters = c.cfg.hjb.max_iters;
    o.workers = c.cfg.workers;
    try {
        V = solve_hjb(c.spec, c.cfg.grid, o);
    } catch (const ConvergenceError& e) {
        double worst = 0.0;
        for (double r : e.residual()) worst = std::max(worst, std::abs(r));
        c.report["hjb_failure"] = {{"message", e.what()}, {"max_residual", num(worst)}};
        c.check("hjb_converged", false, e.what());
        return false;
    }
    for (const auto& w : V.warnings) c.warn(w);
    c.report["hjb"] = {{"iterations", V.iterations},
                       {"max_residual", num(V.max_residual())},
                       {"escape_fraction", num(V.escape_fraction)}};
    c.check("hjb_converged", true, std::to_string(V.iterations) + " iterations");
    return true;
}

void run_hjb(Context& c) {
    DiscreteValueFunction V;
    if (!solve_value(c, V)) return;
    const auto props = value_properties(V);
    c.report["properties"] = to_json(props);
    c.headline["iterations"] = V.iterations;
    c.headline["max_residual"] = num(V.max_residual());
    c.headline["value_at_x0"] = num(V.value_at(point(c.cfg.x0)));
    c.headline["lipschitz_hat"] = num(props.lipschitz_hat);
    c.headline["growth_hat"] = num(props.growth_hat);
    c.headline["semiconvexity_kappa_hat"] = num(props.semiconvexity_kappa_hat);
    c.check("residual", V.max_residual() <= c.cfg.hjb.tol,
            "max |H| " + fmt(V.max_residual()) + " vs tol " + fmt(c.cfg.hjb.tol));

    if (c.cfg.hjb.closed_form && c.cfg.family == "LIN1-CTRL") {
        const double h = V.grid.min_h();
        const auto& us = c.spec.controls.points();
        std::size_t lo = 0, hi = 0;
        for (std::size_t i = 0; i < us.size(); ++i) {
            if (us[i](0) < us[lo](0)) lo = i;
            if (us[i](0) > us[hi](0)) hi = i;
        }
        Lin1Params prm = c.cfg.lin1;
        prm.ubar = us[hi](0) - us[lo](0);
        prm.theta += us[lo](0);
        double err = 0.0, scale = 0.0;
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < V.grid.size(); ++i) {
            const double x = V.grid.point(i)(0);
            if (std::abs(x) <= 2.0 * h) continue;
            const double exact = lin1_ctrl_value(prm, x);
            err = std::max(err, std::abs(V.values[i] - exact));
            scale = std::max(scale, std::abs(exact));
            if (V.policy[i] != (x > 0.0 ? lo : hi)) ++wrong;
        }
        const double rel = scale > 0.0 ? err / scale : err;
        c.report["closed_form"] = {{"sup_error", num(err)}, {"relative_error", num(rel)}, {"policy_mismatches", wrong}};
        c.headline["closed_form_relative_error"] = num(rel);
        c.check("closed_form_value", rel <= c.cfg.hjb.closed_form_tol,
                "relative sup error " + fmt(rel) + " outside |x| <= 2h");
        c.check("closed_form_policy", wrong == 0, std::to_string(wrong) + " nodes differ from the bang-bang rule");
    }
    std::ostringstream t;
    write_value_csv(t, V);
    c.table("value.csv", t.str());
}

std::vector<NamedPolicy> constant_family(const ProblemSpec& spec) {
    std::vector<NamedPolicy> out;
    for (std::size_t i = 0; i < spec.controls.size(); ++i) out.push_back({control_name(spec, i), constant_control(i)});
    return out;
}

void run_dpp(Context& c) {
    DiscreteValueFunction V;
    if (!solve_value(c, V)) return;
    const FeedbackPolicy solver(V.grid, V.policy);
    std::vector<NamedPolicy> family{{"solver", solver.law()}};
    for (auto& p : constant_family(c.spec)) family.push_back(std::move(p));

    std::ostringstream t;
    t << std::setprecision(17) << "x,member,name,value,se,paired_se\n";
    Json reports = Json::array();
    for (double x : c.cfg.dpp.points) {
        const auto r = dpp_check(c.spec, V, c.cfg.dpp.t, point(x), family, c.cfg.numerics);
        Json j = to_json(r);
        j["x"] = x;
        reports.push_back(j);
        const std::string tag = "[x=" + fmt(x) + "]";
        c.headline["gap" + tag] = num(r.gap);
        c.headline["rhs" + tag] = num(r.rhs);
        c.check("dpp_gap" + tag, std::abs(r.gap) <= c.cfg.dpp.tol,
                "|gap| " + fmt(std::abs(r.gap)) + " vs " + fmt(c.cfg.dpp.tol));
        c.check("solver_attains" + tag, r.first_attains,
                "max attained by " + family[r.argmax].name + "; solver within " + fmt(r.paired_se[0] * 3.0));
        for (std::size_t i = 0; i < family.size(); ++i)
            t << x << ',' << i << ',' << family[i].name << ',' << r.semigroup[i].value << ',' << r.semigroup[i].se
              << ',' << r.paired_se[i] << '\n';
    }
    c.report["dpp"] = reports;
    c.table("dpp.csv", t.str());
}

void run_verify(Context& c) {
    DiscreteValueFunction V;
    if (!solve_value(c, V)) return;
    const auto& v = c.cfg.verify;
    const auto optimal = feedback_argmax(c.spec, V, c.cfg.hjb.delta);

    std::ostringstream costs, conds;
    costs << std::setprecision(17) << "x,policy,J,se\n";
    conds << std::setprecision(17) << "check,x,condition,passed,discrepancy,tolerance\n";
    auto add_conditions = [&](const std::string& check, double x, const VerificationReport& r) {
        for (const auto& k : r.conditions)
            conds << check << ',' << x << ',' << k.name << ',' << k.passed << ',' << k.discrepancy << ','
                  << k.tolerance << '\n';
    };

    if (v.mode != "viscosity") {
        auto sampled = random_feedback_policies(c.spec, V.grid, v.random_policies, c.cfg.seed);
        for (auto& p : constant_family(c.spec)) sampled.push_back(std::move(p));
        ClassicalOptions o;
        o.rel_tol = v.classical_rel_tol;
        o.delta = c.cfg.hjb.delta;
        Json reports = Json::array();
        for (double x : v.points) {
            const auto r = classical_verification(c.spec, V, point(x), sampled, c.cfg.numerics, o);
            Json j = to_json(r);
            j["x"] = x;
            reports.push_back(j);
            const std::string tag = "[x=" + fmt(x) + "]";
            c.headline["W" + tag] = num(r.W_at_x);
            c.headline["J_closed_loop" + tag] = num(r.J_closed_loop.value);
            c.check("classical" + tag, r.optimal_consistent,
                    r.optimal_consistent ? "optimal-consistent" : "not verified");
            costs << x << ",closed_loop," << r.J_closed_loop.value << ',' << r.J_closed_loop.se << '\n';
            for (const auto& s : r.suboptimal_J)
                costs << x << ',' << s.name << ',' << s.estimate.value << ',' << s.estimate.se << '\n';
            add_conditions("classical", x, r);
        }
        c.report["classical"] = reports;
        c.table("verify_costs.csv", costs.str());
    }
    if (v.mode != "classical") {
        const ControlLaw law = v.policy == "optimal" ? optimal.law() : constant_control(std::stoul(v.policy));
        ViscosityOptions o;
        o.rel_tol = v.viscosity_rel_tol;
        o.delta = c.cfg.hjb.delta;
        try {
            const auto r = viscosity_condition_report(c.spec, V, law, point(v.viscosity_x0), v.horizon,
                                                      c.cfg.numerics, o);
            Json j = to_json(r);
            j["x"] = v.viscosity_x0;
            j["policy"] = v.policy;
            c.report["viscosity"] = j;
            c.headline["exclusion_fraction"] = num(r.exclusion_fraction);
            for (const auto& k : r.conditions) {
                c.headline["viscosity_" + k.name] = num(k.discrepancy);
                c.check("viscosity(" + k.name + ")", k.passed,
                        "discrepancy " + fmt(k.discrepancy) + " vs " + fmt(k.tolerance));
            }
            add_conditions("viscosity", v.viscosity_x0, r);
        } catch (const CoverageError& e) {
            c.report["viscosity"] = {{"error", e.what()}};
            c.check("viscosity_coverage", false, e.what());
        }
    }
    c.table("verify_conditions.csv", conds.str());
}

std::string provenance_line(const Json& s) {
    std::ostringstream os;
    os << "# tool=" << kToolName << " version=" << kToolVersion
       << " subcommand=" << s["subcommand"].get<std::string>()
       << " config_hash=" << s["config_hash"].get<std::string>() << " seed=" << s["seed"].get<std::uint64_t>()
       << " wall_time_s=" << s["wall_time_s"].get<double>() << '\n';
    return os.str();
}

}  // namespace

RunResult run(const std::string& subcommand, const ExperimentConfig& cfg, bool write_artifacts) {
    const auto start = std::chrono::steady_clock::now();
    Context c(cfg, build_problem(cfg));
    if (subcommand == "certify")
        run_certify(c);
    else if (subcommand == "simulate")
        run_simulate(c);
    else if (subcommand == "bsde")
        run_bsde(c);
    else if (subcommand == "hjb")
        run_hjb(c);
    else if (subcommand == "dpp")
        run_dpp(c);
    else if (subcommand == "verify")
        run_verify(c);
    else
        throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    bool ok = true;
    for (const auto& a : c.assertions) ok = ok && a["passed"].get<bool>();
    if (cfg.strict && !c.warnings.empty()) {
        c.check("strict_no_warnings", false, std::to_string(c.warnings.size()) + " warnings");
        ok = false;
    }

    RunResult result;
    result.exit_code = ok ? kExitOk : kExitAssertion;
    for (const auto& [name, body] : c.tables) result.artifacts.push_back(name);
    const std::string summary_name = subcommand + "_summary.json";
    result.artifacts.push_back(summary_name);

    Json& s = result.summary;
    s["tool"] = kToolName;
    s["version"] = kToolVersion;
    s["subcommand"] = subcommand;
    s["config_hash"] = hex64(config_hash(cfg));
    s["seed"] = cfg.seed;
    s["workers"] = cfg.workers;
    s["wall_time_s"] = wall;
    s["status"] = ok ? "pass" : "fail";
    s["config"] = sections_to_json(cfg.values);
    s["headline"] = c.headline;
    s["assertions"] = c.assertions;
    s["warnings"] = c.warnings;
    s["report"] = c.report;
    s["artifacts"] = result.artifacts;

    if (write_artifacts) {
        namespace fs = std::filesystem;
        const fs::path dir(cfg.out);
        fs::create_directories(dir);
        const std::string header = provenance_line(s);
        for (const auto& [name, body] : c.tables) {
            std::ofstream f(dir / name);
            f << header << body;
            if (!f) throw Error("cannot write " + (dir / name).string());
        }
        std::ofstream f(dir / summary_name);
        f << s.dump(2) << '\n';
        if (!f) throw Error("cannot write " + (dir / summary_name).string());
    }
    return result;
}

ReplayResult replay(const Json& summary, std::optional<std::size_t> workers) {
    if (!summary.is_object() || summary.value("tool", "") != kToolName)
        throw ConfigError("summary", "not a jumpctl summary");
    const std::string version = summary.value("version", "");
    if (version != kToolVersion)
        throw ConfigError("summary", "produced by version " + version + "; this is " + kToolVersion);
    Sections sections = sections_from_json(summary.at("config"));
    sections["run"]["seed"] = std::to_string(summary.at("seed").get<std::uint64_t>());
    if (workers) sections["run"]["workers"] = std::to_string(*workers);
    const ExperimentConfig cfg = config_from_sections(sections);

    const auto fresh = run(summary.at("subcommand").get<std::string>(), cfg, false);
    ReplayResult r;
    r.expected = summary.at("headline");
    r.actual = fresh.summary["headline"];
    r.match = r.expected.dump() == r.actual.dump();
    if (r.match) {
        r.message = "headline matches bit for bit (" + std::to_string(r.actual.size()) + " fields)";
    } else {
        std::string diff;
        for (const auto& [k, v] : r.expected.items())
            if (!r.actual.contains(k) || r.actual[k].dump() != v.dump())
                diff += (diff.empty() ? "" : ", ") + k;
        for (const auto& [k, v] : r.actual.items())
            if (!r.expected.contains(k)) diff += (diff.empty() ? "" : ", ") + k;
        r.message = "headline mismatch in: " + diff;
    }
    return r;
}

}  // namespace jumpctl::cli
