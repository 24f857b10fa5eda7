// Acceptance suite: one PASS/FAIL line per criterion, tolerances and runtime
// bounds pinned below.

#include "jumpctl/cli.hpp"
#include "jumpctl/hjb.hpp"
#include "jumpctl/models.hpp"

#include "support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace jumpctl;
namespace cli = jumpctl::cli;
namespace fs = std::filesystem;

namespace {

namespace pin {
constexpr double kCertifyRuntime = 1.0;
constexpr double kPropertyRuntime = 1.0;
constexpr std::size_t kPropertyTuples = 1000;
constexpr double kForwardRuntime = 60.0;
constexpr double kForwardSe = 3.0;
constexpr double kPoissonRuntime = 30.0;
constexpr double kPoissonSe = 3.0;
constexpr double kBsdeRuntime = 120.0;
constexpr double kOuRelTol = 0.01;
constexpr double kLin1RelTol = 0.02;
constexpr double kComparisonRuntime = 120.0;
constexpr std::size_t kComparisonPairs = 50;
constexpr double kHjbRuntime = 30.0;
constexpr double kHjbRelTol = 0.01;
constexpr double kHamiltonianFactor = 5.0;  // |max_u H(exact)| <= 5h
constexpr double kPropertiesRuntime = 5.0;
constexpr double kSlopeRelTol = 0.10;
constexpr double kKappaFactor = 10.0;  // kappa_hat <= 10h
constexpr double kDppRuntime = 120.0;
constexpr double kVerifyRuntime = 180.0;
constexpr double kExclusionMax = 0.05;
constexpr std::size_t kReplayWorkers = 3;
}  // namespace pin

struct Outcome {
    bool passed = false;
    std::string detail;
    double bound_s = 0.0;
    double seconds = 0.0;
};

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool passed(const Json& summary, const std::string& assertion) {
    for (const auto& a : summary["assertions"])
        if (a["name"] == assertion) return a["passed"].get<bool>();
    return false;
}

double headline(const Json& summary, const std::string& key) { return summary["headline"].at(key).get<double>(); }

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

class Suite {
public:
    explicit Suite(fs::path out) : out_(std::move(out)) {}

    /// Runs a subcommand on pinned INI text and keeps the summary for replay.
    Json run(const std::string& tag, const std::string& sub, const std::string& ini) {
        auto cfg = cli::parse_config(ini, tag);
        cfg = cli::with_value(cfg, "run", "out", (out_ / tag).string());
        const auto r = cli::run(sub, cfg);
        summaries_.emplace_back(tag, r.summary);
        return r.summary;
    }

    /// Library-level rerun at a given worker count, compared bitwise in criterion 11.
    void rerunnable(const std::string& tag, std::function<std::vector<double>(std::size_t)> fn,
                    std::vector<double> at_one) {
        reruns_.push_back({tag, std::move(fn), std::move(at_one)});
    }

    Outcome determinism() const {
        std::size_t ok = 0, total = 0;
        std::string bad;
        for (const auto& [tag, s] : summaries_) {
            ++total;
            const auto r = cli::replay(s, pin::kReplayWorkers);
            if (r.match) ++ok;
            else bad += " " + tag;
        }
        for (const auto& r : reruns_) {
            ++total;
            if (same_bits(r.fn(pin::kReplayWorkers), r.at_one)) ++ok;
            else bad += " " + r.tag;
        }
        Outcome o;
        o.passed = ok == total && total > 0;
        o.detail = std::to_string(ok) + "/" + std::to_string(total) + " runs bit-identical at workers=" +
                   std::to_string(pin::kReplayWorkers) + (bad.empty() ? "" : "; mismatched:" + bad);
        return o;
    }

private:
    struct Rerun {
        std::string tag;
        std::function<std::vector<double>(std::size_t)> fn;
        std::vector<double> at_one;
    };
    fs::path out_;
    std::vector<std::pair<std::string, Json>> summaries_;
    std::vector<Rerun> reruns_;
};

Outcome certificate_arithmetic(Suite& suite) {
    auto values = [](std::size_t) {
        const auto spec = make_lin1();
        return std::vector<double>{certify(spec, 2.0).eta_bp, certify(spec, 4.0).eta_bp, c_p(2.0), c_p(2.5), c_p(4.0)};
    };
    const auto v = values(1);
    suite.rerunnable("certify", values, v);
    Outcome o;
    o.passed = v[0] == 1.5 && v[1] == -1.0 && v[2] == 0.5 && v[3] == 1.875 && v[4] == 12.0;
    o.detail = "eta_bp(2) = " + fmt(v[0], 17) + ", eta_bp(4) = " + fmt(v[1], 17) + ", c_p = {" + fmt(v[2]) + ", " +
               fmt(v[3]) + ", " + fmt(v[4]) + "}";
    return o;
}

Outcome eta_dominance(Suite& suite) {
    auto values = [](std::size_t) {
        jumpctl::testing::Gen g(20240101);
        std::vector<double> diffs;
        for (std::size_t i = 0; i < pin::kPropertyTuples; ++i) {
            const double alpha = g.uniform(0.01, 5.0), ls = g.uniform(0.0, 2.0);
            const double L2 = g.uniform(0.0, 2.0), Lp = g.uniform(0.0, 2.0);
            const double p = 8.0 - 6.0 * g.unit();  // (2, 8]
            diffs.push_back(eta_bp(alpha, ls, L2, L2, 2.0) - eta_bp(alpha, ls, L2, Lp, p));
        }
        return diffs;
    };
    const auto d = values(1);
    suite.rerunnable("eta_dominance", values, d);
    std::size_t violations = 0;
    for (double x : d) violations += x < 0.0;
    Outcome o;
    o.passed = violations == 0;
    o.detail = std::to_string(violations) + " violations over " + std::to_string(d.size()) + " tuples";
    return o;
}

Outcome forward_oracle(Suite& suite) {
    // Effective step 1e-3, recorded every 0.05.
    const auto s = suite.run("forward", "simulate",
                             "[model]\nfamily = LIN1\n"
                             "[numerics]\ndt = 0.05\nsubsteps = 50\nT = 4\npaths = 100000\nx0 = 1\n"
                             "[simulate]\np = 2\nepsilon = 0.15\nprobe_time = 1\ncsv_paths = 10\n");
    const double m = headline(s, "moment_at_probe"), se = headline(s, "moment_at_probe_se");
    const double oracle = std::exp(lin1_moment_rate(Lin1Params{}, 2.0) * 1.0);
    const bool close = std::abs(m - oracle) <= pin::kForwardSe * se;
    Outcome o;
    o.passed = close && passed(s, "decay_bounded");
    o.detail = "E[X_1^2] = " + fmt(m) + " +/- " + fmt(se) + " vs e^{-1.5} = " + fmt(oracle) + " (" +
               fmt(std::abs(m - oracle) / se, 3) + " SE); decay_bounded " + (passed(s, "decay_bounded") ? "yes" : "no");
    return o;
}

Outcome poisson_witness(Suite& suite) {
    const LevyModel unit({{vec({1.0}), 1.0}});
    auto values = [unit](std::size_t w) {
        const auto r = poisson_moment_check(unit, [](double, const Vec&) { return 1.0; }, 1.0, 4.0, 100000, 11, w);
        return std::vector<double>{r.terminal_moment.value, r.terminal_moment.se, r.sup_moment.value, r.rhs};
    };
    const auto v = values(1);
    suite.rerunnable("poisson", values, v);
    const double oracle = poisson_moment_oracle(unit, 1.0, 1.0, 4.0);
    Outcome o;
    o.passed = std::abs(v[0] - oracle) <= pin::kPoissonSe * v[1];
    o.detail = "E|I_1|^4 = " + fmt(v[0]) + " +/- " + fmt(v[1]) + " vs jump-count oracle " + fmt(oracle) +
               "; sup moment " + fmt(v[2]) + ", bound rhs " + fmt(v[3]);
    return o;
}

Outcome bsde_oracles(Suite& suite) {
    const auto ou = suite.run("bsde_ou", "bsde",
                              "[model]\nfamily = OU-DECAY\n"
                              "[numerics]\nT = 10\ndt = 0.02\npaths = 10000\nx0 = 0\n"
                              "grid_lo = -4\ngrid_hi = 4\ngrid_nodes = 129\n"
                              "[bsde]\nbackends = both\n[run]\nseed = 5\n");
    const auto lin = suite.run("bsde_lin1", "bsde",
                               "[model]\nfamily = LIN1\n"
                               "[numerics]\nT = 10\ndt = 0.02\npaths = 10000\nx0 = 2\n"
                               "grid_lo = -1\ngrid_hi = 7\ngrid_nodes = 129\n"
                               "[bsde]\nbackends = both\n[run]\nseed = 6\n");
    auto rel = [](double y, double exact) { return std::abs(y - exact) / std::abs(exact); };
    const double ou_l = headline(ou, "y0_lsmc"), ou_m = headline(ou, "y0_markovian");
    const double li_l = headline(lin, "y0_lsmc"), li_m = headline(lin, "y0_markovian");
    const bool ok_ou = rel(ou_l, 0.5) <= pin::kOuRelTol && rel(ou_m, 0.5) <= pin::kOuRelTol;
    const bool ok_li = rel(li_l, 1.0) <= pin::kLin1RelTol && rel(li_m, 1.0) <= pin::kLin1RelTol;
    const bool agree = passed(ou, "backends_agree") && passed(lin, "backends_agree");
    Outcome o;
    o.passed = ok_ou && ok_li && agree;
    o.detail = "decaying source Y0 = " + fmt(ou_l) + " / " + fmt(ou_m) + " (lsmc / markovian, exact 0.5); LIN1 Y0(2) = " +
               fmt(li_l) + " / " + fmt(li_m) + " (exact 1); backends agree " + (agree ? "yes" : "no");
    return o;
}

Outcome comparison_suite(Suite& suite) {
    auto values = [](std::size_t w) {
        const auto spec = make_lin1();
        SimulationOptions so;
        so.workers = w;
        const auto ens =
            simulate_forward(spec, constant_control(0), vec({1.0}), TimeGrid(0, 3, 0.02), 2000, 21, so);
        BsdeOptions bo;
        bo.workers = w;
        jumpctl::testing::Gen g(606);
        std::vector<double> out;
        for (std::size_t i = 0; i < pin::kComparisonPairs; ++i) {
            const double beta = g.uniform(0.5, 2.0), gz = g.uniform(-0.5, 0.5), gk = g.uniform(0.0, 0.5);
            const double a = g.uniform(-1.0, 1.0), w0 = g.uniform(0.5, 3.0), lift = g.uniform(0.0, 0.5);
            const DriverFn f1 = [=](double, const Vec& x, double y, const Vec& z, double k, const Vec&) {
                return -beta * y + a * std::sin(w0 * x(0)) + gz * z(0) + gk * k;
            };
            const DriverFn f2 = [=](double t, const Vec& x, double y, const Vec& z, double k, const Vec& u) {
                return f1(t, x, y, z, k, u) + lift * (1.0 + std::cos(w0 * x(0)));
            };
            const auto r = comparison_check(spec, f1, f2, constant_control(0), ens, bo);
            out.insert(out.end(), {r.y1.value, r.y2.value, r.gap_se});
        }
        return out;
    };
    const auto v = values(1);
    suite.rerunnable("comparison", values, v);
    std::size_t ok = 0;
    double worst = -INFINITY;
    for (std::size_t i = 0; i < v.size(); i += 3) {
        const double margin = v[i] - v[i + 1] - 3.0 * v[i + 2];
        worst = std::max(worst, margin);
        ok += margin <= 0.0;
    }
    Outcome o;
    o.passed = ok == pin::kComparisonPairs;
    o.detail = std::to_string(ok) + "/" + std::to_string(pin::kComparisonPairs) +
               " ordered pairs with Y1 <= Y2 + 3SE (largest Y1 - Y2 - 3SE = " + fmt(worst) + ")";
    return o;
}

Outcome hjb_oracle(Suite& suite, Json& hjb_summary) {
    hjb_summary = suite.run("hjb", "hjb",
                            "[model]\nfamily = LIN1-CTRL\n"
                            "[numerics]\ngrid_lo = -2\ngrid_hi = 2\ngrid_nodes = 257\n"
                            "[hjb]\ntol = 1e-6\nclosed_form_tol = 0.01\n");
    const double rel = headline(hjb_summary, "closed_form_relative_error");
    const bool policy = passed(hjb_summary, "closed_form_policy");

    const auto spec = make_lin1_ctrl();
    const auto grid = StateGrid::line(-2, 2, 257);
    const double h = grid.min_h();
    std::vector<double> exact(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) exact[i] = lin1_ctrl_value(Lin1Params{}, grid.point(i)(0));
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid.point(i)(0)) <= 2.0 * h) continue;
        const auto e = evaluate_hamiltonian(spec, grid, exact, i);
        worst = std::max(worst, std::abs(e.H[e.argmax]));
    }
    Outcome o;
    o.passed = passed(hjb_summary, "hjb_converged") && rel <= pin::kHjbRelTol && policy &&
               worst <= pin::kHamiltonianFactor * h;
    o.detail = "relative sup error " + fmt(rel) + " outside |x| <= 2h; bang-bang policy " + (policy ? "yes" : "no") +
               "; max |H(exact)| = " + fmt(worst) + " vs 5h = " + fmt(pin::kHamiltonianFactor * h);
    return o;
}

Outcome value_properties_check() {
    const auto V = solve_hjb(make_lin1_ctrl(), StateGrid::line(-2, 2, 257));
    const auto p = value_properties(V);
    const double h = V.grid.min_h();
    const bool lip = std::isfinite(p.lipschitz_hat) && std::abs(p.lipschitz_hat - 0.5) <= pin::kSlopeRelTol * 0.5;
    const bool growth =
        std::isfinite(p.growth_hat) && std::abs(p.growth_hat - 1.0 / 3.0) <= pin::kSlopeRelTol / 3.0;
    const bool kappa = p.semiconvexity_kappa_hat <= pin::kKappaFactor * h;
    Outcome o;
    o.passed = lip && growth && kappa;
    o.detail = "lipschitz_hat " + fmt(p.lipschitz_hat) + " (1/2), growth_hat " + fmt(p.growth_hat) +
               " (1/3), kappa_hat " + fmt(p.semiconvexity_kappa_hat) + " vs 10h = " + fmt(pin::kKappaFactor * h);
    return o;
}

Outcome dpp(Suite& suite) {
    const auto s = suite.run("dpp", "dpp",
                             "[model]\nfamily = LIN1-CTRL\n"
                             "[numerics]\npaths = 10000\n"
                             "[dpp]\nt = 0.5\npoints = -1, 1\ntol = 0.02\n");
    bool ok = passed(s, "hjb_converged");
    std::string d;
    for (const char* x : {"-1", "1"}) {
        const std::string tag = std::string("[x=") + x + "]";
        ok = ok && passed(s, "dpp_gap" + tag) && passed(s, "solver_attains" + tag);
        d += (d.empty() ? "" : "; ") + std::string("x=") + x + ": gap " + fmt(headline(s, "gap" + tag)) +
             ", solver attains " + (passed(s, "solver_attains" + tag) ? "yes" : "no");
    }
    Outcome o;
    o.passed = ok;
    o.detail = d;
    return o;
}

Outcome verification(Suite& suite) {
    const auto opt = suite.run("verify_optimal", "verify",
                               "[model]\nfamily = LIN1-CTRL\n"
                               "[numerics]\npaths = 10000\n"
                               "[verify]\nmode = both\npoints = -1, 1\nrandom_policies = 10\n"
                               "classical_rel_tol = 0.02\nviscosity_rel_tol = 0.05\nviscosity_x0 = 1\n"
                               "policy = optimal\n");
    const auto sub = suite.run("verify_ubar", "verify",
                               "[model]\nfamily = LIN1-CTRL\n"
                               "[numerics]\npaths = 10000\n"
                               "[verify]\nmode = viscosity\nviscosity_rel_tol = 0.05\nviscosity_x0 = 1\n"
                               "policy = 1\n");
    const bool classical = passed(opt, "classical[x=-1]") && passed(opt, "classical[x=1]");
    const bool visc = passed(opt, "viscosity(ii)") && passed(opt, "viscosity(iii)") && passed(opt, "viscosity(v)");
    const bool excl = opt["headline"].contains("exclusion_fraction") &&
                      headline(opt, "exclusion_fraction") <= pin::kExclusionMax;
    const bool iv_fails = sub["headline"].contains("viscosity_iv") && !passed(sub, "viscosity(iv)");
    Outcome o;
    o.passed = classical && visc && excl && iv_fails;
    o.detail = std::string("classical ") + (classical ? "optimal-consistent" : "not verified") +
               "; optimal policy (ii)(iii)(v) " + (visc ? "pass" : "fail") + ", exclusion " +
               (opt["headline"].contains("exclusion_fraction") ? fmt(headline(opt, "exclusion_fraction")) : "n/a") +
               "; constant u-bar (iv) " + (iv_fails ? "fails as expected" : "did not fail") +
               (sub["headline"].contains("viscosity_iv") ? " (" + fmt(headline(sub, "viscosity_iv")) + ")" : "");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::string out = "acceptance_out";
    app.add_option("--out", out, "Directory for run artifacts");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(out);

    Suite suite{fs::path(out)};
    Json hjb_summary;
    struct Criterion {
        int id;
        double bound_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, pin::kCertifyRuntime, [&] { return certificate_arithmetic(suite); }},
        {2, pin::kPropertyRuntime, [&] { return eta_dominance(suite); }},
        {3, pin::kForwardRuntime, [&] { return forward_oracle(suite); }},
        {4, pin::kPoissonRuntime, [&] { return poisson_witness(suite); }},
        {5, pin::kBsdeRuntime, [&] { return bsde_oracles(suite); }},
        {6, pin::kComparisonRuntime, [&] { return comparison_suite(suite); }},
        {7, pin::kHjbRuntime, [&] { return hjb_oracle(suite, hjb_summary); }},
        {8, pin::kPropertiesRuntime, [] { return value_properties_check(); }},
        {9, pin::kDppRuntime, [&] { return dpp(suite); }},
        {10, pin::kVerifyRuntime, [&] { return verification(suite); }},
        {11, 0.0, [&] { return suite.determinism(); }},
    };

    Json report = Json::array();
    bool all = true;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.passed = false;
            o.detail = std::string("error: ") + e.what();
        }
        o.seconds = seconds_since(t0);
        o.bound_s = c.bound_s;
        const bool in_time = c.bound_s <= 0.0 || o.seconds < c.bound_s;
        const bool ok = o.passed && in_time;
        all = all && ok;
        std::cout << "criterion " << std::setw(2) << c.id << ": " << (ok ? "PASS" : "FAIL") << "  [" << fmt(o.seconds, 3)
                  << " s" << (c.bound_s > 0.0 ? " < " + fmt(c.bound_s) + " s" : "") << (in_time ? "" : " EXCEEDED")
                  << "]  " << o.detail << std::endl;
        report.push_back({{"criterion", c.id},
                          {"passed", ok},
                          {"seconds", o.seconds},
                          {"bound_s", c.bound_s},
                          {"detail", o.detail}});
    }
    std::ofstream(fs::path(out) / "acceptance.json") << report.dump(2) << '\n';
    return all ? 0 : 1;
}
