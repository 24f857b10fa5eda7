#include "jumpctl/backward.hpp"
#include "jumpctl/models.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace jumpctl;
using jumpctl::testing::Gen;

namespace {

PathEnsemble lin1_paths(double x0, double T, std::size_t n, std::uint64_t seed, std::size_t workers = 1) {
    SimulationOptions o;
    o.workers = workers;
    return simulate_forward(make_lin1(), constant_control(0), vec({x0}), TimeGrid(0, T, 0.02), n, seed, o);
}

BsdeOptions markovian(double lo, double hi, std::size_t nodes) {
    BsdeOptions o;
    o.method = BsdeMethod::markovian;
    o.grid = StateGrid::line(lo, hi, nodes);
    return o;
}

}  // namespace

TEST(BsdeMethod, Names) {
    EXPECT_EQ(parse_method("lsmc"), BsdeMethod::lsmc);
    EXPECT_EQ(parse_method("markovian"), BsdeMethod::markovian);
    EXPECT_STREQ(method_name(BsdeMethod::markovian), "markovian");
    EXPECT_THROW(parse_method("picard"), DomainError);
}

TEST(SolveBsde, OuDecayBothBackends) {
    // Y_0 = g0/(beta + a) = 0.5 on the infinite horizon; e^{-2T} tail is negligible.
    const auto spec = make_ou_decay();
    const auto ens = simulate_forward(spec, constant_control(0), vec({0.0}), TimeGrid(0, 10, 0.02), 2000, 1);
    const auto a = solve_bsde(spec, constant_control(0), ens);
    const auto b = solve_bsde(spec, constant_control(0), ens, markovian(-4, 4, 129));
    EXPECT_NEAR(a.y0.value, 0.5, 0.005);
    EXPECT_NEAR(b.y0.value, 0.5, 0.005);
    EXPECT_NEAR(a.y0.value, b.y0.value, 1e-10);
    EXPECT_EQ(b.y0.se, 0.0);
    EXPECT_NEAR(ou_decay_y(OuDecayParams{}, 1.0), 0.5 * std::exp(-1.0), 1e-15);
}

TEST(SolveBsde, Lin1ControlFreeCost) {
    // Y_0 = q x/(beta + theta) = 1 at x = 2.
    const auto ens = lin1_paths(2.0, 8.0, 4000, 2);
    const auto a = solve_bsde(make_lin1(), constant_control(0), ens);
    EXPECT_NEAR(a.y0.value, 1.0, 0.02);
    EXPECT_NEAR(a.y0.value, 1.0, 4 * a.y0.se + 0.005);
    const auto b = solve_bsde(make_lin1(), constant_control(0), ens, markovian(-1, 7, 129));
    EXPECT_NEAR(b.y0.value, 1.0, 0.01);
}

TEST(SolveBsde, StepSizeGuard) {
    Lin1Params prm;
    prm.beta = 60.0;  // dt * ell_y = 1.2
    const auto spec = make_lin1(prm);
    const auto ens = simulate_forward(spec, constant_control(0), vec({1.0}), TimeGrid(0, 1, 0.02), 50, 1);
    EXPECT_THROW(solve_bsde(spec, constant_control(0), ens), StepSizeError);
}

TEST(SolveBsde, WorkerCountDoesNotChangeBits) {
    const auto spec = make_lin1();
    const auto ens = lin1_paths(1.0, 2.0, 500, 3);
    BsdeOptions o1, o3;
    o3.workers = 3;
    const auto a = solve_bsde(spec, constant_control(0), ens, o1);
    const auto b = solve_bsde(spec, constant_control(0), ens, o3);
    ASSERT_EQ(a.Y.size(), b.Y.size());
    for (std::size_t i = 0; i < a.Y.size(); ++i) ASSERT_EQ(a.Y[i], b.Y[i]);
    auto m1 = markovian(-3, 3, 65), m3 = markovian(-3, 3, 65);
    m3.workers = 3;
    EXPECT_EQ(solve_bsde(spec, constant_control(0), ens, m1).y0.value,
              solve_bsde(spec, constant_control(0), ens, m3).y0.value);
}

TEST(SolveBsdeProperty, LinearInTheSource) {
    // f = -beta y + q x is linear in q, and so is every regression.
    const auto ens = lin1_paths(1.5, 3.0, 600, 4);
    const auto base = solve_bsde(make_lin1(), constant_control(0), ens).y0.value;
    Gen g(8);
    for (int i = 0; i < 8; ++i) {
        Lin1Params prm;
        prm.q = g.uniform(-4, 4);
        const auto y = solve_bsde(make_lin1(prm), constant_control(0), ens).y0.value;
        EXPECT_NEAR(y, prm.q * base, 1e-9 * (1 + std::abs(prm.q * base)));
    }
}

TEST(ComparisonProperty, OrderedDriversGiveOrderedValues) {
    const auto spec = make_lin1();
    const auto ens = lin1_paths(1.0, 3.0, 800, 5);
    Gen g(12);
    for (int i = 0; i < 10; ++i) {
        const double beta = g.uniform(0.5, 2.0), gz = g.uniform(-0.5, 0.5), gk = g.uniform(0.0, 0.5);
        const double lift = g.uniform(0.0, 0.3), w = g.uniform(0.5, 3.0);
        const DriverFn f1 = [=](double, const Vec& x, double y, const Vec& z, double k, const Vec&) {
            return -beta * y + std::sin(w * x(0)) + gz * z(0) + gk * k;
        };
        const DriverFn f2 = [=](double t, const Vec& x, double y, const Vec& z, double k, const Vec& u) {
            return f1(t, x, y, z, k, u) + lift * x(0) * x(0) / (1 + x(0) * x(0));
        };
        const auto r = comparison_check(spec, f1, f2, constant_control(0), ens);
        EXPECT_TRUE(r.holds) << r.y1.value << " vs " << r.y2.value;
        EXPECT_LE(r.y1.value, r.y2.value + 3 * r.gap_se + 1e-12);
    }
}

TEST(Comparison, RejectsUnorderedPair) {
    const auto ens = lin1_paths(1.0, 1.0, 50, 6);
    const DriverFn f1 = [](double, const Vec& x, double y, const Vec&, double, const Vec&) { return -y + x(0); };
    const DriverFn f2 = [](double, const Vec&, double y, const Vec&, double, const Vec&) { return -y; };
    EXPECT_THROW(comparison_check(make_lin1(), f1, f2, constant_control(0), ens), DomainError);
}

TEST(Picard, Contracts) {
    const auto ens = lin1_paths(1.0, 2.0, 300, 7);
    const auto r = picard_diagnostic(make_lin1(), constant_control(0), ens, {}, 8);
    ASSERT_EQ(r.sweep_differences.size(), 8u);
    EXPECT_LT(r.sweep_differences.back(), r.sweep_differences.front());
    EXPECT_LT(r.contraction_factor, 1.0);
}

TEST(Apriori, FiniteRatio) {
    const auto ens = lin1_paths(1.0, 4.0, 400, 8);
    const auto sol = solve_bsde(make_lin1(), constant_control(0), ens);
    const auto r = bsde_apriori_check(sol, ens, make_lin1(), 2.0);
    EXPECT_TRUE(std::isfinite(r.ratio));
    EXPECT_GT(r.lhs, 0.0);
}

TEST(CostJ, ConstantControlsMatchClosedForm) {
    Numerics n;
    n.T = 8.0;
    n.paths = 2000;
    const auto spec = make_lin1_ctrl();
    const auto j0 = cost_J(spec, constant_control(0), vec({1.0}), n);
    const auto j1 = cost_J(spec, constant_control(1), vec({1.0}), n);
    EXPECT_NEAR(j0.value, 0.5, 0.02);
    EXPECT_NEAR(j1.value, 1.0 / 3.0, 0.02);
    EXPECT_GT(j0.value, j1.value);
}
