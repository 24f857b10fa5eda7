#include "jumpctl/hjb.hpp"
#include "jumpctl/models.hpp"
#include "jumpctl/verify.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace jumpctl;
using jumpctl::testing::Gen;

namespace {

/// LIN1 dynamics with running reward x^2: V = a x^2, a = 1/(beta - kappa_2) = 0.4.
ProblemSpec quadratic_model() {
    auto spec = make_lin1();
    spec.name = "LIN1-QUAD";
    spec.coeffs.driver = [](double, const Vec& x, double y, const Vec&, double, const Vec&) {
        return -y + x(0) * x(0);
    };
    return spec;
}

double sup_error(const DiscreteValueFunction& V, double (*exact)(double), double band = 0.0) {
    double e = 0.0;
    for (std::size_t i = 0; i < V.grid.size(); ++i) {
        const double x = V.grid.point(i)(0);
        if (std::abs(x) <= band) continue;
        e = std::max(e, std::abs(V.values[i] - exact(x)));
    }
    return e;
}

double lin1_exact(double x) { return lin1_ctrl_value(Lin1Params{}, x); }

}  // namespace

TEST(ArgmaxLowest, TiesGoToLowestIndex) {
    const std::vector<double> h{1.0, 3.0, 3.0, 2.0};
    EXPECT_EQ(argmax_lowest(h), 1u);
    const std::vector<double> near{2.0, 2.0 + 1e-14, 1.0};
    EXPECT_EQ(argmax_lowest(near), 0u);
    EXPECT_THROW(argmax_lowest(std::vector<double>{}), DomainError);
}

TEST(SolveHjb, Lin1CtrlMatchesClosedForm) {
    const auto V = solve_hjb(make_lin1_ctrl(), StateGrid::line(-2, 2, 257));
    const double h = V.grid.min_h();
    EXPECT_LE(sup_error(V, lin1_exact, 2 * h), 1e-6);
    EXPECT_LE(V.max_residual(), 1e-6);
    EXPECT_LE(V.iterations, 5u);
    for (std::size_t i = 0; i < V.grid.size(); ++i) {
        const double x = V.grid.point(i)(0);
        if (std::abs(x) > 2 * h) {
            EXPECT_EQ(V.policy[i], x > 0 ? 0u : 1u) << "x = " << x;
        }
    }
    EXPECT_NEAR(V.value_at(vec({1.0})), 0.5, 1e-6);
}

TEST(SolveHjb, ExactValueHasSmallHamiltonian) {
    const auto spec = make_lin1_ctrl();
    const auto grid = StateGrid::line(-2, 2, 129);
    std::vector<double> exact(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) exact[i] = lin1_exact(grid.point(i)(0));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.point(i)(0);
        if (std::abs(x) <= 2 * grid.min_h()) continue;
        const auto e = evaluate_hamiltonian(spec, grid, exact, i);
        EXPECT_LE(std::abs(e.H[e.argmax]), 5 * grid.min_h()) << "x = " << x;
        EXPECT_NEAR(hamiltonian(spec, grid, exact, i, spec.controls[e.argmax]), e.H[e.argmax], 1e-12);
    }
}

TEST(SolveHjb, QuadraticModelConvergesUnderRefinement) {
    const auto spec = quadratic_model();
    double prev = INFINITY;
    for (std::size_t n : {33u, 65u, 129u, 257u}) {
        const auto V = solve_hjb(spec, StateGrid::line(-2, 2, n));
        double err = 0.0;
        // Interior window; the boundary closure is one-sided.
        for (std::size_t i = 0; i < V.grid.size(); ++i) {
            const double x = V.grid.point(i)(0);
            if (std::abs(x) <= 1.0) err = std::max(err, std::abs(V.values[i] - 0.4 * x * x));
        }
        EXPECT_LT(err, prev) << n << " nodes";
        prev = err;
    }
    EXPECT_LT(prev, 0.01);
}

TEST(SolveHjb, WorkersDoNotChangeBits) {
    HjbOptions a, b;
    b.workers = 3;
    const auto V1 = solve_hjb(make_lin1_ctrl(), StateGrid::line(-2, 2, 65), a);
    const auto V3 = solve_hjb(make_lin1_ctrl(), StateGrid::line(-2, 2, 65), b);
    for (std::size_t i = 0; i < V1.values.size(); ++i) ASSERT_EQ(V1.values[i], V3.values[i]);
}

TEST(SolveHjb, NonAutonomousModelIsRejected) {
    EXPECT_THROW(solve_hjb(make_ou_decay(), StateGrid::line(-2, 2, 33)), DomainError);
}

TEST(SolveHjb, IterationCapRaisesConvergenceError) {
    HjbOptions o;
    o.max_iters = 1;
    o.initial_policy.assign(257, 1);  // wrong on the positive half-line
    try {
        solve_hjb(make_lin1_ctrl(), StateGrid::line(-2, 2, 257), o);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.residual().size(), 257u);
    }
}

TEST(ValueProperties, Lin1CtrlSlopes) {
    const auto V = solve_hjb(make_lin1_ctrl(), StateGrid::line(-2, 2, 257));
    const auto p = value_properties(V);
    EXPECT_NEAR(p.lipschitz_hat, 0.5, 1e-6);
    EXPECT_NEAR(p.growth_hat, 1.0 / 3.0, 1e-6);  // (2/2)/(1+2)
    EXPECT_LE(p.semiconvexity_kappa_hat, 10 * V.grid.min_h());
}

TEST(ValuePropertiesProperty, ConvexFunctionsHaveZeroKappa) {
    Gen g(17);
    const auto grid = StateGrid::line(-2, 2, 65);
    for (int t = 0; t < 50; ++t) {
        const double a = g.uniform(0, 2), b = g.uniform(-2, 2), c = g.uniform(-1, 1);
        DiscreteValueFunction V;
        V.grid = grid;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid.point(i)(0);
            V.values.push_back(a * x * x + b * x + c);
        }
        EXPECT_NEAR(value_properties(V).semiconvexity_kappa_hat, 0.0, 1e-9);
        for (auto& v : V.values) v = -v;
        EXPECT_NEAR(value_properties(V).semiconvexity_kappa_hat, a, 1e-6 + 1e-9 * a);
    }
}

TEST(Dpp, SolverPolicyAttainsTheMax) {
    const auto spec = make_lin1_ctrl();
    const auto V = solve_hjb(spec, StateGrid::line(-2, 2, 257));
    const FeedbackPolicy pol(V.grid, V.policy);
    Numerics n;
    n.paths = 3000;
    n.seed = 4;
    for (double x : {-1.0, 1.0}) {
        const auto r = dpp_check(spec, V, 0.5, vec({x}), {{"solver", pol.law()}, {"u0", constant_control(0)},
                                                           {"ubar", constant_control(1)}}, n);
        EXPECT_LE(std::abs(r.gap), 0.02) << x;
        EXPECT_TRUE(r.first_attains) << x;
        EXPECT_EQ(r.semigroup.size(), 3u);
        EXPECT_EQ(r.paired_se.size(), 3u);
    }
}
