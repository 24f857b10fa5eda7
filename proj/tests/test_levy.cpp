#include "jumpctl/levy.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace jumpctl;
using jumpctl::testing::Gen;

namespace {

LevyModel symmetric() { return LevyModel({{vec({1.0}), 0.5}, {vec({-1.0}), 0.5}}); }

LevyModel random_model(Gen& g) {
    std::vector<JumpAtom> atoms;
    const std::size_t n = 1 + g.index(5);
    for (std::size_t j = 0; j < n; ++j) {
        double e = g.uniform(0.05, 2.0);
        if (g.coin()) e = -e;
        atoms.push_back({vec({e}), g.uniform(0.01, 3.0)});
    }
    return LevyModel(atoms);
}

}  // namespace

TEST(LevyModel, RejectsInvalidAtoms) {
    EXPECT_THROW(LevyModel({{vec({0.0}), 1.0}}), DomainError);
    EXPECT_THROW(LevyModel({{vec({1.0}), 0.0}}), DomainError);
    EXPECT_THROW(LevyModel({{vec({1.0}), -2.0}}), DomainError);
    EXPECT_THROW(LevyModel({{vec({1.0}), 1.0}, {vec({1.0, 2.0}), 1.0}}), DomainError);
    EXPECT_THROW(LevyModel({{vec({NAN}), 1.0}}), DomainError);
}

TEST(LevyModel, TotalsAndSmallJumpIntegral) {
    const LevyModel m({{vec({1.0}), 0.5}, {vec({-1.0}), 0.5}, {vec({0.5}), 2.0}});
    EXPECT_DOUBLE_EQ(m.total_rate(), 3.0);
    // 0.5 + 0.5 + 2 * 0.25
    EXPECT_DOUBLE_EQ(m.small_jump_integral(), 1.5);
    EXPECT_EQ(m.mark_dim(), 1u);
    EXPECT_TRUE(LevyModel().empty());
    EXPECT_EQ(LevyModel().mark_dim(), 0u);
}

TEST(LevyNorm, ClosedForms) {
    const auto m = symmetric();
    EXPECT_DOUBLE_EQ(norm_lambda_p(m, [](const Vec& e) { return e(0); }, 2.0), 1.0);
    const LevyModel big({{vec({2.0}), 1.0}});
    EXPECT_NEAR(norm_lambda_p(big, [](const Vec& e) { return e(0); }, 4.0), 2.0, 1e-15);
    EXPECT_THROW(norm_lambda_p(m, [](const Vec&) { return 1.0; }, 0.5), DomainError);
    EXPECT_THROW(norm_lambda_p(m, [](const Vec&) { return NAN; }, 2.0), EvaluationError);
}

TEST(LevyCompensator, ScalarAndVector) {
    const auto m = symmetric();
    EXPECT_DOUBLE_EQ(compensator_integral(m, [](const Vec& e) { return e(0); }), 0.0);
    EXPECT_DOUBLE_EQ(compensator_integral(m, [](const Vec& e) { return e(0) * e(0); }), 1.0);
    const Vec v = compensator_integral(m, [](const Vec& e) { return vec({e(0), 2.0}); });
    EXPECT_DOUBLE_EQ(v(0), 0.0);
    EXPECT_DOUBLE_EQ(v(1), 2.0);
}

TEST(LevyNormProperty, MinkowskiAndHomogeneity) {
    Gen g(101);
    for (int trial = 0; trial < 300; ++trial) {
        const auto m = random_model(g);
        const double p = g.uniform(1.0, 8.0);
        const double a = g.uniform(-2, 2), b = g.uniform(-2, 2), s = g.uniform(-3, 3);
        auto k1 = [a](const Vec& e) { return a * e(0); };
        auto k2 = [b](const Vec& e) { return b * e(0) * e(0); };
        auto sum = [&](const Vec& e) { return k1(e) + k2(e); };
        const double n1 = norm_lambda_p(m, k1, p), n2 = norm_lambda_p(m, k2, p);
        EXPECT_LE(norm_lambda_p(m, sum, p), (n1 + n2) * (1 + 1e-12) + 1e-300);
        EXPECT_NEAR(norm_lambda_p(m, [&](const Vec& e) { return s * k1(e); }, p), std::abs(s) * n1,
                    1e-12 * (1 + n1 * std::abs(s)));
    }
}

TEST(SampleJumps, SortedInsideWindowAndDeterministic) {
    const auto m = symmetric();
    Stream a(7, 3), b(7, 3);
    const auto ea = sample_jumps(m, 0.5, 4.0, a);
    const auto eb = sample_jumps(m, 0.5, 4.0, b);
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        EXPECT_EQ(ea[i].time, eb[i].time);
        EXPECT_EQ(ea[i].atom, eb[i].atom);
        EXPECT_GT(ea[i].time, 0.5);
        EXPECT_LE(ea[i].time, 4.0);
        if (i > 0) {
            EXPECT_GE(ea[i].time, ea[i - 1].time);
        }
    }
    Stream c(7, 3);
    EXPECT_TRUE(sample_jumps(LevyModel(), 0.0, 10.0, c).empty());
}

TEST(SampleJumps, CountsMatchPoissonLaw) {
    // Rates 0.2 and 0.8 over a window of length 2: counts are Poisson(0.4) and Poisson(1.6).
    const LevyModel m({{vec({1.0}), 0.2}, {vec({-0.5}), 0.8}});
    const int n = 40000;
    double c0 = 0, c1 = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        Stream s(11, static_cast<std::uint64_t>(i));
        const auto ev = sample_jumps(m, 1.0, 3.0, s);
        for (const auto& e : ev) (e.atom == 0 ? c0 : c1) += 1;
        sq += static_cast<double>(ev.size() * ev.size());
    }
    const double m0 = c0 / n, m1 = c1 / n;
    EXPECT_NEAR(m0, 0.4, 4 * std::sqrt(0.4 / n));
    EXPECT_NEAR(m1, 1.6, 4 * std::sqrt(1.6 / n));
    // E[N^2] = lambda + lambda^2 with lambda = 2
    EXPECT_NEAR(sq / n, 6.0, 0.15);
}
