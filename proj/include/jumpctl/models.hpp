#pragma once

#include "jumpctl/problem.hpp"

#include <vector>

namespace jumpctl {

/// Scalar linear model with multiplicative noise and jumps:
/// b = -(theta + u)x, sigma = sigma1 x, gamma = c e x, f = -beta y + q x,
/// rho(e) = 1 ∧ |e|.
struct Lin1Params {
    double theta = 1.0;
    double sigma1 = 0.5;
    double c = 0.5;
    double beta = 1.0;
    double q = 1.0;
    double ubar = 1.0;
    std::vector<JumpAtom> atoms{{vec({1.0}), 0.5}, {vec({-1.0}), 0.5}};
};

/// Control set {0}.
ProblemSpec make_lin1(const Lin1Params& params = {});
/// Control set {0, ubar}.
ProblemSpec make_lin1_ctrl(const Lin1Params& params = {});
/// LIN1-CTRL on an arbitrary scalar control grid.
ProblemSpec make_lin1_controls(const Lin1Params& params, const std::vector<double>& controls);

/// Closed-form value of LIN1-CTRL: q x/(beta + theta) for x >= 0 and
/// q x/(beta + theta + ubar) for x < 0.
double lin1_ctrl_value(const Lin1Params& params, double x);

/// Cost of the constant control u: q x/(beta + theta + u).
double lin1_constant_cost(const Lin1Params& params, double x, double u);

/// Exponent kappa_p with E|X_s|^p = |x0|^p exp(kappa_p s) under constant u.
double lin1_moment_rate(const Lin1Params& params, double p, double u = 0.0);

/// State-independent decaying sources: b = -theta x + g0 e^{-a t},
/// sigma = const, gamma = c e, f = -beta y + g0 e^{-a t}.
struct OuDecayParams {
    double theta = 1.0;
    double sigma = 0.5;
    double c = 0.5;
    double g0 = 1.0;
    double decay = 1.0;
    double beta = 1.0;
    std::vector<JumpAtom> atoms{{vec({1.0}), 0.5}, {vec({-1.0}), 0.5}};
};

ProblemSpec make_ou_decay(const OuDecayParams& params = {});

/// Y_t = g0 e^{-a t}/(beta + a) (infinite horizon).
double ou_decay_y(const OuDecayParams& params, double t);

}  // namespace jumpctl
