#include "jumpctl/problem.hpp"

#include "jumpctl/forward.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jumpctl {

ControlGrid::ControlGrid(std::vector<Vec> points) : points_(std::move(points)) {
    if (points_.empty()) throw DomainError("ControlGrid: must be nonempty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (points_[i].size() == 0 || points_[i].size() != points_[0].size())
            throw DomainError("ControlGrid: point " + std::to_string(i) + " has inconsistent dimension");
        if (!points_[i].allFinite()) throw DomainError("ControlGrid: point " + std::to_string(i) + " is nonfinite");
        for (std::size_t j = 0; j < i; ++j)
            if (points_[i] == points_[j])
                throw DomainError("ControlGrid: duplicate points " + std::to_string(j) + " and " + std::to_string(i));
    }
}

void ProblemSpec::validate() const {
    const auto& c = coeffs;
    if (!c.drift || !c.diffusion || !c.jump || !c.driver || !c.rho)
        throw DomainError("ProblemSpec '" + name + "': every coefficient function must be set");
    if (!constants.ell_gamma) throw DomainError("ProblemSpec '" + name + "': ell_gamma must be set");
    if (state_dim == 0 || state_dim > static_cast<std::size_t>(kMaxDim) || noise_dim == 0 ||
        noise_dim > static_cast<std::size_t>(kMaxDim))
        throw DomainError("ProblemSpec '" + name + "': unsupported state or noise dimension");
    if (controls.size() == 0) throw DomainError("ProblemSpec '" + name + "': empty control grid");
    const auto& k = constants;
    if (!(k.alpha_b > 0.0) || !(k.alpha_f > 0.0) || !(k.varrho > 0.0))
        throw DomainError("ProblemSpec '" + name + "': alpha_b, alpha_f and varrho must be positive");
    for (double v : {k.ell_b, k.ell_sigma, k.ell_1, k.ell_x, k.ell_y, k.ell_z, k.ell_k})
        if (!(v >= 0.0)) throw DomainError("ProblemSpec '" + name + "': Lipschitz constants must be nonnegative");

    const Vec zero = Vec::Zero(static_cast<Eigen::Index>(state_dim));
    const auto n = static_cast<Eigen::Index>(state_dim);
    const auto d = static_cast<Eigen::Index>(noise_dim);
    for (const auto& u : controls.points()) {
        const Vec b = c.drift(0.0, zero, u);
        const Mat s = c.diffusion(0.0, zero, u);
        if (b.size() != n) throw DomainError("ProblemSpec '" + name + "': drift has wrong dimension");
        if (s.rows() != n || s.cols() != d)
            throw DomainError("ProblemSpec '" + name + "': diffusion has wrong shape");
        for (std::size_t j = 0; j < levy.size(); ++j) {
            const Vec g = c.jump(0.0, levy.atom(j).mark, zero, u);
            if (g.size() != n) throw DomainError("ProblemSpec '" + name + "': jump coefficient has wrong dimension");
        }
    }
    for (std::size_t j = 0; j < levy.size(); ++j) {
        const double lg = k.ell_gamma(levy.atom(j).mark);
        if (!(lg >= 0.0 && lg <= 1.0))
            throw DomainError("ProblemSpec '" + name + "': ell_gamma must lie in [0, 1] at atom " + std::to_string(j));
    }
}

ControlLaw constant_control(std::size_t index) {
    return [index](double, const Vec&) { return index; };
}

ControlLaw open_loop_control(std::function<std::size_t(double)> schedule) {
    return [schedule = std::move(schedule)](double t, const Vec&) { return schedule(t); };
}

Vec jump_compensator(const ProblemSpec& spec, double t, const Vec& x, const Vec& u) {
    Vec sum = Vec::Zero(x.size());
    for (const auto& a : spec.levy.atoms()) sum += a.rate * spec.coeffs.jump(t, a.mark, x, u);
    return sum;
}

double aggregate_jumps(const ProblemSpec& spec, std::span<const double> k_per_atom) {
    double s = 0.0;
    for (std::size_t j = 0; j < spec.levy.size(); ++j) {
        const auto& a = spec.levy.atom(j);
        s += a.rate * k_per_atom[j] * spec.coeffs.rho(a.mark);
    }
    return s;
}

double c_p(double p) {
    if (!(p >= 2.0)) throw DomainError("c_p: requires p >= 2");
    if (p > 2.0 && p < 3.0) return p * (p - 1.0) * 0.5;
    return p * (p - 1.0) * std::pow(2.0, p - 4.0);
}

double eta_bp(double alpha_b, double ell_sigma, double L_gamma_2, double L_gamma_p, double p) {
    const double cp = c_p(p);
    return 2.0 * alpha_b - (p - 1.0) * ell_sigma * ell_sigma - (2.0 * cp / p) * L_gamma_2 * L_gamma_2 -
           cp * std::pow(L_gamma_p, p);
}

namespace {

// Probe points for the k-monotonicity checks on the driver.
std::vector<Vec> probe_states(std::size_t n) {
    const double values[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
    std::vector<Vec> out;
    if (n == 1) {
        for (double v : values) out.push_back(vec({v}));
    } else if (n == 2) {
        for (double a : values)
            for (double b : values) out.push_back(vec({a, b}));
    } else {
        for (std::size_t k = 0; k < n; ++k)
            for (double v : values) {
                Vec x = Vec::Zero(static_cast<Eigen::Index>(n));
                x(static_cast<Eigen::Index>(k)) = v;
                out.push_back(x);
            }
    }
    return out;
}

std::vector<Vec> probe_z(std::size_t d) {
    std::vector<Vec> out{Vec::Zero(static_cast<Eigen::Index>(d))};
    for (std::size_t k = 0; k < d; ++k)
        for (double v : {-1.0, 1.0}) {
            Vec z = Vec::Zero(static_cast<Eigen::Index>(d));
            z(static_cast<Eigen::Index>(k)) = v;
            out.push_back(z);
        }
    return out;
}

bool exceeds(double lhs, double rhs) {
    return lhs > rhs + 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

}  // namespace

DissipativityCertificate certify(const ProblemSpec& spec, double p) {
    if (!(p >= 2.0)) throw DomainError("certify: requires p >= 2");
    const auto& k = spec.constants;
    DissipativityCertificate cert;
    cert.p = p;
    cert.c_p = c_p(p);
    cert.L_gamma_2 = k.ell_1 * norm_lambda_p(spec.levy, k.ell_gamma, 2.0);
    cert.L_gamma_p = k.ell_1 * norm_lambda_p(spec.levy, k.ell_gamma, p);
    cert.eta_bp = eta_bp(k.alpha_b, k.ell_sigma, cert.L_gamma_2, cert.L_gamma_p, p);
    cert.eta_b2 = eta_bp(k.alpha_b, k.ell_sigma, cert.L_gamma_2, cert.L_gamma_2, 2.0);
    cert.rho_norm_2 = norm_lambda_p(spec.levy, spec.coeffs.rho, 2.0);
    cert.alpha_f_bar =
        k.alpha_f - (k.ell_z * k.ell_z + k.ell_k * k.ell_k * cert.rho_norm_2 * cert.rho_norm_2) / 2.0;
    cert.passes_C1p = cert.eta_bp > 0.0;
    cert.passes_C2 = cert.alpha_f_bar > 0.0;

    cert.passes_C3 = true;
    for (std::size_t j = 0; j < spec.levy.size(); ++j) {
        const auto& a = spec.levy.atom(j);
        const double r = spec.coeffs.rho(a.mark);
        const double bound = k.varrho * std::min(1.0, a.mark.norm());
        if (!std::isfinite(r) || r < -1e-9 || exceeds(r, bound)) {
            cert.passes_C3 = false;
            std::ostringstream os;
            os << "C3 fails at atom " << j << ": rho = " << r << ", bound = " << bound;
            cert.notes.push_back(os.str());
        }
    }

    // Difference quotients of f in k on a fixed probe set.
    cert.passes_C4 = true;
    cert.passes_C4_weak = true;
    const double ks[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
    const auto xs = probe_states(spec.state_dim);
    const auto zs = probe_z(spec.noise_dim);
    for (double t : {0.0, 1.0})
        for (const auto& x : xs)
            for (double y : {-1.0, 0.0, 1.0})
                for (const auto& z : zs)
                    for (std::size_t ui = 0; ui < spec.controls.size(); ++ui) {
                        const auto& u = spec.controls[ui];
                        double prev = spec.coeffs.driver(t, x, y, z, ks[0], u);
                        for (std::size_t i = 1; i < std::size(ks); ++i) {
                            const double cur = spec.coeffs.driver(t, x, y, z, ks[i], u);
                            const double slope = (cur - prev) / (ks[i] - ks[i - 1]);
                            const double tol = 1e-9 * std::max({1.0, std::abs(cur), std::abs(prev)});
                            if (cert.passes_C4 && slope < -tol) {
                                cert.passes_C4 = false;
                                std::ostringstream os;
                                os << "C4' fails: f decreasing in k near k = " << ks[i] << " at x = " << x.transpose()
                                   << ", control " << ui;
                                cert.notes.push_back(os.str());
                            }
                            if (cert.passes_C4_weak && !(slope > -1.0 / k.varrho - tol)) {
                                cert.passes_C4_weak = false;
                                cert.notes.push_back("C4 fails: k-slope at or below -1/varrho");
                            }
                            prev = cur;
                        }
                    }
    return cert;
}

ViolationReport validate_declared_constants(const ProblemSpec& spec, std::size_t sample_count,
                                            const StateBox& box, Stream& stream) {
    if (sample_count < 1) throw DomainError("validate_declared_constants: sample_count must be >= 1");
    const auto n = static_cast<Eigen::Index>(spec.state_dim);
    if (box.lo.size() != n || box.hi.size() != n)
        throw DomainError("validate_declared_constants: box dimension mismatch");
    const auto& k = spec.constants;
    const auto& c = spec.coeffs;
    const double radius = std::max({1.0, box.lo.cwiseAbs().maxCoeff(), box.hi.cwiseAbs().maxCoeff()});
    constexpr std::size_t max_recorded = 1000;

    ViolationReport report;
    report.samples = sample_count;
    auto draw_state = [&] {
        Vec x(n);
        for (Eigen::Index i = 0; i < n; ++i) x(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * stream.uniform();
        return x;
    };
    auto draw_scalar = [&] { return radius * (2.0 * stream.uniform() - 1.0); };
    auto draw_z = [&] {
        Vec z(static_cast<Eigen::Index>(spec.noise_dim));
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = draw_scalar();
        return z;
    };
    auto record = [&](const char* what, const Vec& x, const Vec& xp, std::size_t ui, double lhs, double rhs) {
        if (report.violations.size() < max_recorded) report.violations.push_back({what, x, xp, ui, lhs, rhs});
    };

    for (std::size_t s = 0; s < sample_count; ++s) {
        const double t = stream.uniform();
        const Vec x = draw_state();
        const Vec xp = draw_state();
        const auto ui = static_cast<std::size_t>(stream.uniform() * static_cast<double>(spec.controls.size())) %
                        spec.controls.size();
        const auto& u = spec.controls[ui];
        const Vec dx = x - xp;
        const double dist = dx.norm();

        const Vec db = c.drift(t, x, u) - c.drift(t, xp, u);
        if (exceeds(db.norm(), k.ell_b * dist)) record("drift Lipschitz", x, xp, ui, db.norm(), k.ell_b * dist);
        if (exceeds(db.dot(dx), -k.alpha_b * dist * dist))
            record("drift monotonicity", x, xp, ui, db.dot(dx), -k.alpha_b * dist * dist);
        const double ds = (c.diffusion(t, x, u) - c.diffusion(t, xp, u)).norm();
        if (exceeds(ds, k.ell_sigma * dist)) record("diffusion Lipschitz", x, xp, ui, ds, k.ell_sigma * dist);
        for (const auto& a : spec.levy.atoms()) {
            const double dg = (c.jump(t, a.mark, x, u) - c.jump(t, a.mark, xp, u)).norm();
            const double bound = k.ell_1 * k.ell_gamma(a.mark) * dist;
            if (exceeds(dg, bound)) record("jump Lipschitz", x, xp, ui, dg, bound);
        }

        const double y = draw_scalar(), yp = draw_scalar();
        const double kk = draw_scalar(), kp = draw_scalar();
        const Vec z = draw_z(), zp = draw_z();
        const double f1 = c.driver(t, x, y, z, kk, u);
        const double f2 = c.driver(t, xp, yp, zp, kp, u);
        const double lip = k.ell_x * dist + k.ell_y * std::abs(y - yp) + k.ell_z * (z - zp).norm() +
                           k.ell_k * std::abs(kk - kp);
        if (exceeds(std::abs(f1 - f2), lip)) record("driver Lipschitz", x, xp, ui, std::abs(f1 - f2), lip);
        const double fy = (c.driver(t, x, y, z, kk, u) - c.driver(t, x, yp, z, kk, u)) * (y - yp);
        if (exceeds(fy, -k.alpha_f * (y - yp) * (y - yp)))
            record("driver monotonicity in y", x, xp, ui, fy, -k.alpha_f * (y - yp) * (y - yp));
    }
    return report;
}

AdmissibilityEstimate admissibility_functionals(const ProblemSpec& spec, const ControlLaw& control,
                                                const Vec& x0, double p, const TimeGrid& grid,
                                                std::size_t paths, std::uint64_t seed, std::size_t workers) {
    if (paths < 1) throw DomainError("admissibility_functionals: needs at least one path");
    if (!(p >= 2.0)) throw DomainError("admissibility_functionals: requires p >= 2");
    SimulationOptions opts;
    opts.workers = workers;
    opts.record_jumps = false;
    const auto ens = simulate_forward(spec, control, x0, grid, paths, seed, opts);
    const auto& c = spec.coeffs;
    const Vec zero = Vec::Zero(static_cast<Eigen::Index>(spec.state_dim));
    const Vec zero_z = Vec::Zero(static_cast<Eigen::Index>(spec.noise_dim));

    auto integrands = [&](double t, const Vec& u, double out[3]) {
        const Vec b0 = c.drift(t, zero, u);
        const Mat s0 = c.diffusion(t, zero, u);
        double gp = 0.0, g2 = 0.0;
        for (const auto& a : spec.levy.atoms()) {
            const double g = c.jump(t, a.mark, zero, u).norm();
            gp += a.rate * std::pow(g, p);
            g2 += a.rate * g * g;
        }
        const double f0 = c.driver(t, zero, 0.0, zero_z, 0.0, u);
        if (!b0.allFinite() || !s0.allFinite() || !std::isfinite(gp) || !std::isfinite(f0))
            throw EvaluationError("admissibility_functionals: coefficient at the origin is nonfinite");
        out[0] = std::pow(b0.norm(), p) + std::pow(s0.norm(), p) + gp;
        out[1] = b0.squaredNorm() + s0.squaredNorm() + g2;
        out[2] = f0 * f0;
    };

    std::vector<double> pi1, pi2;
    for (std::size_t path = 0; path < ens.paths(); ++path) {
        if (ens.diverged(path)) continue;
        double acc[3] = {0.0, 0.0, 0.0};
        double prev[3];
        integrands(grid.time(0), spec.controls[ens.control(path, 0)], prev);
        for (std::size_t i = 1; i < grid.nodes(); ++i) {
            double cur[3];
            integrands(grid.time(i), spec.controls[ens.control(path, i)], cur);
            const double h = grid.time(i) - grid.time(i - 1);
            for (int q = 0; q < 3; ++q) acc[q] += 0.5 * h * (prev[q] + cur[q]);
            std::copy(cur, cur + 3, prev);
        }
        pi1.push_back(acc[0] + std::pow(acc[1], p / 2.0));
        pi2.push_back(std::pow(acc[2], p / 2.0));
    }
    return {mean_and_se(pi1), mean_and_se(pi2)};
}

}  // namespace jumpctl
