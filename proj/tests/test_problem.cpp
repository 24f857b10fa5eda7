#include "jumpctl/models.hpp"
#include "jumpctl/problem.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace jumpctl;
using jumpctl::testing::Gen;

TEST(Cp, BranchValues) {
    EXPECT_EQ(c_p(2.0), 0.5);
    EXPECT_EQ(c_p(2.5), 1.875);  // 2.5 * 1.5 / 2
    EXPECT_EQ(c_p(3.0), 3.0);    // 3 * 2 * 2^-1
    EXPECT_EQ(c_p(4.0), 12.0);   // 4 * 3 * 2^0
    EXPECT_THROW(c_p(1.5), DomainError);
}

TEST(Certify, Lin1Constants) {
    const auto spec = make_lin1();
    // alpha_b = 1, ell_sigma = 0.5, L_{gamma,q} = 0.5 for every q.
    const auto c2 = certify(spec, 2.0);
    EXPECT_EQ(c2.eta_bp, 1.5);  // 2 - 0.25 - 0.125 - 0.125
    EXPECT_EQ(c2.L_gamma_2, 0.5);
    EXPECT_EQ(c2.alpha_f_bar, 1.0);
    EXPECT_TRUE(c2.passes_all());
    const auto c4 = certify(spec, 4.0);
    EXPECT_EQ(c4.eta_bp, -1.0);  // 2 - 0.75 - 1.5 - 0.75
    EXPECT_FALSE(c4.passes_C1p);
    EXPECT_TRUE(c4.passes_C2);
    EXPECT_EQ(c4.eta_b2, 1.5);
}

TEST(Certify, OuDecayPasses) {
    const auto c = certify(make_ou_decay(), 2.0);
    EXPECT_DOUBLE_EQ(c.eta_bp, 2.0);
    EXPECT_TRUE(c.passes_all());
}

TEST(Certify, DetectsC3AndC4Failures) {
    auto spec = make_lin1();
    spec.coeffs.rho = [](const Vec& e) { return 2.0 * std::min(1.0, e.norm()); };
    const auto c = certify(spec, 2.0);
    EXPECT_FALSE(c.passes_C3);
    EXPECT_FALSE(c.notes.empty());

    auto dec = make_lin1();
    dec.coeffs.driver = [](double, const Vec& x, double y, const Vec&, double k, const Vec&) {
        return -y + x(0) - 0.5 * k;
    };
    const auto d = certify(dec, 2.0);
    EXPECT_FALSE(d.passes_C4);
    EXPECT_TRUE(d.passes_C4_weak);  // slope -0.5 > -1/varrho
}

TEST(CertifyProperty, EtaB2DominatesEtaBp) {
    // Random constant tuples, p uniform in (2, 8].
    Gen g(2024);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const double alpha = g.uniform(0.01, 5.0), ls = g.uniform(0.0, 2.0);
        const double L2 = g.uniform(0.0, 2.0), Lp = g.uniform(0.0, 2.0);
        const double p = 8.0 - 6.0 * g.unit();
        if (eta_bp(alpha, ls, L2, L2, 2.0) - eta_bp(alpha, ls, L2, Lp, p) < 0.0) ++violations;
    }
    EXPECT_EQ(violations, 0);
}

TEST(CertifyProperty, RandomLin1MatchesHandFormula) {
    Gen g(77);
    for (int i = 0; i < 200; ++i) {
        Lin1Params prm;
        prm.theta = g.uniform(0.1, 3.0);
        prm.sigma1 = g.uniform(0.0, 1.0);
        prm.c = g.uniform(0.0, 0.9);
        prm.beta = g.uniform(0.2, 3.0);
        const double e = g.uniform(0.2, 1.0), r1 = g.uniform(0.1, 2.0), r2 = g.uniform(0.1, 2.0);
        prm.atoms = {{vec({e}), r1}, {vec({-e}), r2}};
        const double p = g.uniform(2.0, 6.0);
        const auto c = certify(make_lin1(prm), p);
        // ell_1 = c e, ell_gamma = 1 on both atoms.
        const double L2 = prm.c * e * std::sqrt(r1 + r2);
        const double Lp = prm.c * e * std::pow(r1 + r2, 1.0 / p);
        const double cp = (p > 2.0 && p < 3.0) ? p * (p - 1) / 2 : p * (p - 1) * std::pow(2.0, p - 4);
        const double expect = 2 * prm.theta - (p - 1) * prm.sigma1 * prm.sigma1 - 2 * cp / p * L2 * L2 -
                              cp * std::pow(Lp, p);
        EXPECT_NEAR(c.eta_bp, expect, 1e-12 * (1 + std::abs(expect)));
        EXPECT_GE(c.eta_b2 - c.eta_bp, -1e-12);
    }
}

TEST(ControlGrid, Validation) {
    EXPECT_THROW(ControlGrid(std::vector<Vec>{}), DomainError);
    EXPECT_THROW(ControlGrid({vec({1.0}), vec({1.0})}), DomainError);
    EXPECT_THROW(ControlGrid({vec({1.0}), vec({1.0, 2.0})}), DomainError);
    EXPECT_EQ(ControlGrid({vec({0.0}), vec({1.0})}).size(), 2u);
}

TEST(ProblemSpec, ValidateCatchesMissingPieces) {
    auto spec = make_lin1();
    spec.coeffs.driver = nullptr;
    EXPECT_THROW(spec.validate(), DomainError);
    auto neg = make_lin1();
    neg.constants.alpha_f = -1.0;
    EXPECT_THROW(neg.validate(), DomainError);
    Lin1Params bad;
    bad.c = 2.0;  // 1 + c e = -1 at e = -1
    EXPECT_THROW(make_lin1(bad), DomainError);
}

TEST(Aggregation, JumpsAndCompensator) {
    const auto spec = make_lin1();
    const double k[2] = {2.0, -4.0};
    // 0.5 * 2 * 1 + 0.5 * (-4) * 1
    EXPECT_DOUBLE_EQ(aggregate_jumps(spec, k), -1.0);
    EXPECT_DOUBLE_EQ(jump_compensator(spec, 0.0, vec({3.0}), vec({0.0}))(0), 0.0);
}

TEST(DeclaredConstants, TrueConstantsSurvive) {
    Stream s(3, 0, salt::validation);
    const auto r = validate_declared_constants(make_lin1_ctrl(), 2000, {vec({-3.0}), vec({3.0})}, s);
    EXPECT_EQ(r.samples, 2000u);
    EXPECT_TRUE(r.empty());
}

TEST(DeclaredConstants, UnderstatedConstantsAreFalsified) {
    auto spec = make_lin1_ctrl();
    spec.constants.ell_b = 0.5;  // true value is 2
    spec.constants.ell_y = 0.1;  // true value is 1
    Stream s(3, 0, salt::validation);
    const auto r = validate_declared_constants(spec, 500, {vec({-3.0}), vec({3.0})}, s);
    ASSERT_FALSE(r.empty());
    bool drift = false, driver = false;
    for (const auto& v : r.violations) {
        drift = drift || v.inequality == "drift Lipschitz";
        driver = driver || v.inequality == "driver Lipschitz";
        EXPECT_GT(v.lhs, v.rhs);
    }
    EXPECT_TRUE(drift);
    EXPECT_TRUE(driver);
}

TEST(Admissibility, OuDecayClosedForm) {
    // At the origin: b0 = g0 e^{-at}, sigma0 = sigma, gamma0 = c e, f0 = g0 e^{-at}.
    const OuDecayParams prm;
    const double T = 3.0, p = 2.0;
    const TimeGrid grid(0.0, T, 0.01);
    const auto a = admissibility_functionals(make_ou_decay(prm), constant_control(0), vec({0.3}), p, grid, 50, 9);
    const double src = (1 - std::exp(-2 * T)) / 2;     // ∫ e^{-2t}
    const double inner = src + 0.25 * T + 0.25 * T;  // + sigma^2 T + Σ rate c^2 e^2 T
    EXPECT_NEAR(a.pi1.value, 2 * inner, 1e-4);
    EXPECT_NEAR(a.pi2.value, src, 1e-4);
    EXPECT_NEAR(a.pi1.se, 0.0, 1e-12);
}

TEST(Admissibility, Lin1VanishesAtOrigin) {
    const auto a = admissibility_functionals(make_lin1(), constant_control(0), vec({1.0}), 4.0, TimeGrid(0, 2, 0.05),
                                             100, 1);
    EXPECT_EQ(a.pi1.value, 0.0);
    EXPECT_EQ(a.pi2.value, 0.0);
}
