#include "jumpctl/models.hpp"

#include <algorithm>
#include <cmath>

namespace jumpctl {

namespace {

double max_mark(const std::vector<JumpAtom>& atoms) {
    double m = 0.0;
    for (const auto& a : atoms) m = std::max(m, a.mark.norm());
    return m;
}

ProblemSpec lin1_with_controls(const Lin1Params& prm, std::vector<Vec> controls, const char* name) {
    for (const auto& a : prm.atoms) {
        if (a.mark.size() != 1) throw DomainError("LIN1: marks must be scalar");
        if (!(1.0 + prm.c * a.mark(0) > 0.0)) throw DomainError("LIN1: requires 1 + c e > 0 at every atom");
    }
    ProblemSpec spec;
    spec.name = name;
    spec.levy = LevyModel(prm.atoms);
    spec.controls = ControlGrid(std::move(controls));

    const double theta = prm.theta, s1 = prm.sigma1, c = prm.c, beta = prm.beta, q = prm.q;
    spec.coeffs.drift = [theta](double, const Vec& x, const Vec& u) -> Vec { return -(theta + u(0)) * x; };
    spec.coeffs.diffusion = [s1](double, const Vec& x, const Vec&) -> Mat {
        Mat m(1, 1);
        m(0, 0) = s1 * x(0);
        return m;
    };
    spec.coeffs.jump = [c](double, const Vec& e, const Vec& x, const Vec&) -> Vec { return c * e(0) * x; };
    spec.coeffs.driver = [beta, q](double, const Vec& x, double y, const Vec&, double, const Vec&) {
        return -beta * y + q * x(0);
    };
    spec.coeffs.rho = [](const Vec& e) { return std::min(1.0, e.norm()); };
    spec.coeffs.autonomous = true;

    double umin = spec.controls[0](0), umax = umin;
    for (const auto& u : spec.controls.points()) {
        umin = std::min(umin, u(0));
        umax = std::max(umax, u(0));
    }
    const double emax = max_mark(prm.atoms);
    auto& k = spec.constants;
    k.ell_b = std::abs(theta) + std::max(std::abs(umin), std::abs(umax));
    k.alpha_b = theta + umin;
    k.ell_sigma = std::abs(s1);
    k.ell_1 = std::abs(c) * emax;
    k.ell_gamma = [emax](const Vec& e) { return emax > 0.0 ? e.norm() / emax : 0.0; };
    k.ell_x = std::abs(q);
    k.ell_y = std::abs(beta);
    k.ell_z = 0.0;
    k.ell_k = 0.0;
    k.alpha_f = beta;
    k.varrho = 1.0;
    spec.validate();
    return spec;
}

}  // namespace

ProblemSpec make_lin1(const Lin1Params& params) {
    return lin1_with_controls(params, {vec({0.0})}, "LIN1");
}

ProblemSpec make_lin1_ctrl(const Lin1Params& params) {
    return lin1_with_controls(params, {vec({0.0}), vec({params.ubar})}, "LIN1-CTRL");
}

ProblemSpec make_lin1_controls(const Lin1Params& params, const std::vector<double>& controls) {
    std::vector<Vec> points;
    for (double u : controls) points.push_back(vec({u}));
    return lin1_with_controls(params, std::move(points), "LIN1-CTRL");
}

double lin1_ctrl_value(const Lin1Params& p, double x) {
    return x >= 0.0 ? p.q * x / (p.beta + p.theta) : p.q * x / (p.beta + p.theta + p.ubar);
}

double lin1_constant_cost(const Lin1Params& p, double x, double u) { return p.q * x / (p.beta + p.theta + u); }

double lin1_moment_rate(const Lin1Params& prm, double p, double u) {
    double jumps = 0.0;
    for (const auto& a : prm.atoms) {
        const double ce = prm.c * a.mark(0);
        jumps += a.rate * (std::pow(std::abs(1.0 + ce), p) - 1.0 - p * ce);
    }
    return -p * (prm.theta + u) + 0.5 * p * (p - 1.0) * prm.sigma1 * prm.sigma1 + jumps;
}

ProblemSpec make_ou_decay(const OuDecayParams& prm) {
    ProblemSpec spec;
    spec.name = "OU-DECAY";
    spec.levy = LevyModel(prm.atoms);
    spec.controls = ControlGrid({vec({0.0})});

    const double theta = prm.theta, sigma = prm.sigma, c = prm.c, g0 = prm.g0, a = prm.decay, beta = prm.beta;
    spec.coeffs.drift = [theta, g0, a](double t, const Vec& x, const Vec&) -> Vec {
        Vec out = -theta * x;
        out(0) += g0 * std::exp(-a * t);
        return out;
    };
    spec.coeffs.diffusion = [sigma](double, const Vec&, const Vec&) -> Mat {
        Mat m(1, 1);
        m(0, 0) = sigma;
        return m;
    };
    spec.coeffs.jump = [c](double, const Vec& e, const Vec&, const Vec&) -> Vec { return vec({c * e(0)}); };
    spec.coeffs.driver = [beta, g0, a](double t, const Vec&, double y, const Vec&, double, const Vec&) {
        return -beta * y + g0 * std::exp(-a * t);
    };
    spec.coeffs.rho = [](const Vec& e) { return std::min(1.0, e.norm()); };
    spec.coeffs.autonomous = false;

    auto& k = spec.constants;
    k.ell_b = std::abs(theta);
    k.alpha_b = theta;
    k.ell_sigma = 0.0;
    k.ell_1 = 0.0;
    k.ell_gamma = [](const Vec&) { return 0.0; };
    k.ell_y = std::abs(beta);
    k.alpha_f = beta;
    k.varrho = 1.0;
    spec.validate();
    return spec;
}

double ou_decay_y(const OuDecayParams& p, double t) { return p.g0 * std::exp(-p.decay * t) / (p.beta + p.decay); }

}  // namespace jumpctl
