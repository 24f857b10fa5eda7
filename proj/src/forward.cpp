#include "jumpctl/forward.hpp"

#include "jumpctl/parallel.hpp"
#include "jumpctl/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace jumpctl {

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t paths, std::size_t state_dim, std::size_t noise_dim,
                           std::size_t atom_count, std::uint64_t seed)
    : grid_(grid), paths_(paths), n_(state_dim), d_(noise_dim), atoms_(atom_count), seed_(seed) {
    states_.assign(paths * grid_.nodes() * n_, 0.0);
    increments_.assign(paths * grid_.intervals() * d_, 0.0);
    controls_.assign(paths * grid_.nodes(), 0);
    counts_.assign(paths * grid_.intervals() * atoms_, 0);
    jump_log_.resize(paths);
    diverged_.assign(paths, 0);
}

Vec PathEnsemble::state(std::size_t path, std::size_t node) const {
    Vec x(static_cast<Eigen::Index>(n_));
    const double* row = &states_[(path * grid_.nodes() + node) * n_];
    for (std::size_t k = 0; k < n_; ++k) x(static_cast<Eigen::Index>(k)) = row[k];
    return x;
}

Vec PathEnsemble::brownian_increment(std::size_t path, std::size_t interval) const {
    Vec b(static_cast<Eigen::Index>(d_));
    const double* row = &increments_[(path * grid_.intervals() + interval) * d_];
    for (std::size_t k = 0; k < d_; ++k) b(static_cast<Eigen::Index>(k)) = row[k];
    return b;
}

std::size_t PathEnsemble::diverged_count() const {
    return static_cast<std::size_t>(std::count(diverged_.begin(), diverged_.end(), std::uint8_t{1}));
}

namespace {

constexpr double kDivergenceBound = 1e100;

bool blown_up(const Vec& x) { return !x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceBound; }

void simulate_path(const ProblemSpec& spec, const ControlLaw& control, const Vec& x0, PathEnsemble& ens,
                   std::size_t path, const SimulationOptions& opt) {
    const auto& grid = ens.grid();
    const auto& c = spec.coeffs;
    const auto n = static_cast<Eigen::Index>(spec.state_dim);
    const auto d = static_cast<Eigen::Index>(spec.noise_dim);
    Stream stream(ens.seed(), path, salt::forward);
    const auto events =
        spec.levy.empty() ? std::vector<JumpEvent>{} : sample_jumps(spec.levy, grid.t0(), grid.T(), stream);
    std::size_t next = 0;

    Vec x = x0;
    std::copy(x.data(), x.data() + n, ens.state_row(path, 0));
    Vec dw(d), db(d);
    const std::size_t m = std::max<std::size_t>(1, opt.substeps);

    auto fail = [&](std::size_t from_node) {
        ens.mark_diverged(path);
        for (std::size_t i = from_node; i < grid.nodes(); ++i)
            std::fill_n(ens.state_row(path, i), n, std::numeric_limits<double>::quiet_NaN());
    };

    for (std::size_t i = 0; i < grid.intervals(); ++i) {
        const double ta = grid.time(i);
        const double tb = grid.time(i + 1);
        const double h = (tb - ta) / static_cast<double>(m);
        db.setZero();
        for (std::size_t s = 0; s < m; ++s) {
            const double sa = ta + static_cast<double>(s) * h;
            const double sb = s + 1 == m ? tb : sa + h;
            const std::size_t ui = control(sa, x);
            if (ui >= spec.controls.size()) throw DomainError("simulate_forward: control law returned a bad index");
            if (s == 0) ens.set_control(path, i, ui);
            const Vec& u = spec.controls[ui];
            double cur = sa;
            for (;;) {
                const bool jump_here = next < events.size() && events[next].time <= sb;
                const double stop = jump_here ? events[next].time : sb;
                const double piece = stop - cur;
                if (piece > 0.0) {
                    const double root = std::sqrt(piece);
                    for (Eigen::Index k = 0; k < d; ++k) dw(k) = root * stream.normal();
                    Vec drift = c.drift(cur, x, u);
                    for (const auto& a : spec.levy.atoms()) drift -= a.rate * c.jump(cur, a.mark, x, u);
                    x += drift * piece + c.diffusion(cur, x, u) * dw;
                    db += dw;
                }
                if (!jump_here) break;
                const auto& ev = events[next++];
                const auto& atom = spec.levy.atom(ev.atom);
                if (opt.record_jumps) ens.jump_log(path).push_back({ev.time, ev.atom, i, x});
                ens.add_jump(path, i, ev.atom);
                x += c.jump(ev.time, atom.mark, x, u);
                cur = ev.time;
            }
            if (blown_up(x)) {
                fail(i + 1);
                return;
            }
        }
        std::copy(x.data(), x.data() + n, ens.state_row(path, i + 1));
        std::copy(db.data(), db.data() + d, ens.increment_row(path, i));
    }
    const std::size_t last = grid.nodes() - 1;
    const std::size_t ui = control(grid.time(last), x);
    if (ui >= spec.controls.size()) throw DomainError("simulate_forward: control law returned a bad index");
    ens.set_control(path, last, ui);
}

Estimate estimate_of(std::vector<double>& samples) {
    if (samples.empty()) throw DivergenceError("all paths diverged; no statistics available");
    return mean_and_se(samples);
}

}  // namespace

PathEnsemble simulate_forward(const ProblemSpec& spec, const ControlLaw& control, const Vec& x0,
                              const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                              const SimulationOptions& options) {
    if (paths < 1) throw DomainError("simulate_forward: needs at least one path");
    if (static_cast<std::size_t>(x0.size()) != spec.state_dim)
        throw DomainError("simulate_forward: x0 has the wrong dimension");
    if (!control) throw DomainError("simulate_forward: control law is empty");
    PathEnsemble ens(grid, paths, spec.state_dim, spec.noise_dim, spec.levy.size(), seed);
    parallel_for(paths, options.workers, [&](std::size_t p) { simulate_path(spec, control, x0, ens, p, options); });
    const std::size_t bad = ens.diverged_count();
    if (static_cast<double>(bad) > options.max_divergence_fraction * static_cast<double>(paths)) {
        std::ostringstream os;
        os << "simulate_forward: " << bad << " of " << paths << " paths diverged";
        throw DivergenceError(os.str());
    }
    return ens;
}

std::vector<MomentPoint> moment_curve(const PathEnsemble& ens, double p) {
    if (!(p >= 1.0)) throw DomainError("moment_curve: p must be >= 1");
    const auto& grid = ens.grid();
    std::vector<MomentPoint> curve;
    curve.reserve(grid.nodes());
    std::vector<double> samples;
    samples.reserve(ens.paths());
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        samples.clear();
        for (std::size_t path = 0; path < ens.paths(); ++path) {
            if (ens.diverged(path)) continue;
            samples.push_back(p == 2.0 ? ens.state(path, i).squaredNorm() : std::pow(ens.state(path, i).norm(), p));
        }
        const auto e = estimate_of(samples);
        curve.push_back({grid.time(i), e.value, e.se});
    }
    return curve;
}

LpNormEstimates lp_norm_estimates(const PathEnsemble& ens, double p) {
    if (!(p >= 2.0)) throw DomainError("lp_norm_estimates: p must be >= 2");
    const auto& grid = ens.grid();
    std::vector<double> sup, ip, i2;
    for (std::size_t path = 0; path < ens.paths(); ++path) {
        if (ens.diverged(path)) continue;
        double s = 0.0, a = 0.0, b = 0.0;
        double prev_p = 0.0, prev_2 = 0.0;
        for (std::size_t i = 0; i < grid.nodes(); ++i) {
            const double r = ens.state(path, i).norm();
            const double vp = std::pow(r, p), v2 = r * r;
            s = std::max(s, vp);
            if (i > 0) {
                const double h = grid.time(i) - grid.time(i - 1);
                a += 0.5 * h * (prev_p + vp);
                b += 0.5 * h * (prev_2 + v2);
            }
            prev_p = vp;
            prev_2 = v2;
        }
        sup.push_back(s);
        ip.push_back(a);
        i2.push_back(std::pow(b, p / 2.0));
    }
    return {estimate_of(sup), estimate_of(ip), estimate_of(i2)};
}

DecayReport decay_rate_check(std::span<const MomentPoint> curve, double eta_bp, double epsilon, double p) {
    if (!(epsilon > 0.0 && epsilon < eta_bp))
        throw DomainError("decay_rate_check: requires 0 < epsilon < eta_bp");
    if (curve.size() < 4) throw DomainError("decay_rate_check: curve needs at least four nodes");
    DecayReport r;
    r.rate = 0.5 * p * (eta_bp - epsilon);
    const double t0 = curve.front().time;
    const double split = t0 + 0.75 * (curve.back().time - t0);
    for (const auto& pt : curve) {
        const double w = pt.value * std::exp(r.rate * (pt.time - t0));
        r.sup_witness = std::max(r.sup_witness, w);
        if (pt.time <= split)
            r.early_sup = std::max(r.early_sup, w);
        else
            r.late_sup = std::max(r.late_sup, w);
    }
    r.bounded = std::isfinite(r.sup_witness) && r.late_sup <= 1.05 * r.early_sup;
    return r;
}

ContinuousDependenceReport continuous_dependence_check(const ProblemSpec& spec, const ControlLaw& control,
                                                       const Vec& x, const Vec& x_prime, const TimeGrid& grid,
                                                       std::size_t paths, double p, std::uint64_t seed,
                                                       const SimulationOptions& options) {
    if (x.size() != x_prime.size()) throw DomainError("continuous_dependence_check: dimension mismatch");
    const double dist = (x - x_prime).norm();
    if (!(dist > 0.0)) throw DomainError("continuous_dependence_check: requires x != x'");
    if (!(p >= 2.0)) throw DomainError("continuous_dependence_check: p must be >= 2");
    SimulationOptions opt = options;
    opt.record_jumps = false;
    const auto a = simulate_forward(spec, control, x, grid, paths, seed, opt);
    const auto b = simulate_forward(spec, control, x_prime, grid, paths, seed, opt);
    const double scale = std::pow(dist, p);
    std::vector<double> ratio, sup, integral;
    for (std::size_t path = 0; path < paths; ++path) {
        if (a.diverged(path) || b.diverged(path)) continue;
        double s = 0.0, acc = 0.0, prev = 0.0;
        for (std::size_t i = 0; i < grid.nodes(); ++i) {
            const double v = std::pow((a.state(path, i) - b.state(path, i)).norm(), p);
            s = std::max(s, v);
            if (i > 0) acc += 0.5 * (grid.time(i) - grid.time(i - 1)) * (prev + v);
            prev = v;
        }
        sup.push_back(s / scale);
        integral.push_back(acc / scale);
        ratio.push_back((s + acc) / scale);
    }
    return {estimate_of(ratio), estimate_of(sup), estimate_of(integral)};
}

PoissonMomentReport poisson_moment_check(const LevyModel& model, const MarkTimeFn& h, double T, double p,
                                         std::size_t paths, std::uint64_t seed, std::size_t workers) {
    if (!(p >= 2.0)) throw DomainError("poisson_moment_check: p must be >= 2");
    if (!(T > 0.0)) throw DomainError("poisson_moment_check: T must be positive");
    if (paths < 1) throw DomainError("poisson_moment_check: needs at least one path");

    // Compensator A(t) = ∫_0^t Σ_j rate_j h(r, e_j) dr on a fine grid, and the
    // deterministic right-hand side.
    constexpr std::size_t kFine = 2000;
    const double step = T / static_cast<double>(kFine);
    std::vector<double> comp(kFine + 1, 0.0);
    double int_p = 0.0, int_2 = 0.0;
    auto rates_at = [&](double t, double& mean, double& ap, double& a2) {
        mean = ap = a2 = 0.0;
        for (std::size_t j = 0; j < model.size(); ++j) {
            const auto& a = model.atom(j);
            const double v = h(t, a.mark);
            if (!std::isfinite(v)) detail::throw_nonfinite(j, a.mark);
            mean += a.rate * v;
            ap += a.rate * std::pow(std::abs(v), p);
            a2 += a.rate * v * v;
        }
    };
    double m0, p0, q0;
    rates_at(0.0, m0, p0, q0);
    for (std::size_t i = 1; i <= kFine; ++i) {
        double m1, p1, q1;
        rates_at(static_cast<double>(i) * step, m1, p1, q1);
        comp[i] = comp[i - 1] + 0.5 * step * (m0 + m1);
        int_p += 0.5 * step * (p0 + p1);
        int_2 += 0.5 * step * (q0 + q1);
        m0 = m1;
        p0 = p1;
        q0 = q1;
    }
    auto compensator = [&](double t) {
        const double s = std::clamp(t / step, 0.0, static_cast<double>(kFine));
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(s), kFine - 1);
        const double w = s - static_cast<double>(i);
        return (1.0 - w) * comp[i] + w * comp[i + 1];
    };

    std::vector<double> sup(paths), term(paths);
    parallel_for(paths, workers, [&](std::size_t path) {
        Stream stream(seed, path, salt::poisson);
        const auto events = sample_jumps(model, 0.0, T, stream);
        double jumps = 0.0, s = 0.0;
        std::size_t next = 0;
        // Walk the fine grid, inserting event times so pre- and post-jump
        // values are both visited.
        for (std::size_t i = 0; i <= kFine; ++i) {
            const double t = static_cast<double>(i) * step;
            while (next < events.size() && events[next].time <= t) {
                const auto& ev = events[next++];
                s = std::max(s, std::abs(jumps - compensator(ev.time)));
                jumps += h(ev.time, model.atom(ev.atom).mark);
                s = std::max(s, std::abs(jumps - compensator(ev.time)));
            }
            s = std::max(s, std::abs(jumps - comp[i]));
        }
        sup[path] = std::pow(s, p);
        term[path] = std::pow(std::abs(jumps - comp[kFine]), p);
    });

    PoissonMomentReport r;
    r.sup_moment = mean_and_se(sup);
    r.terminal_moment = mean_and_se(term);
    r.rhs = int_p + std::pow(int_2, p / 2.0);
    r.ratio = r.rhs > 0.0 ? r.sup_moment.value / r.rhs : (r.sup_moment.value > 0.0 ? HUGE_VAL : 0.0);
    return r;
}

double poisson_moment_oracle(const LevyModel& model, double h, double T, double p, std::size_t kmax) {
    const double mean = model.total_rate() * T;
    double sum = 0.0;
    double prob = std::exp(-mean);
    for (std::size_t k = 0; k <= kmax; ++k) {
        if (k > 0) prob *= mean / static_cast<double>(k);
        sum += prob * std::pow(std::abs(h * (static_cast<double>(k) - mean)), p);
    }
    return sum;
}

double truncation_horizon(double eta_bp, double p, double tail_tol) {
    if (!(eta_bp > 0.0)) throw DomainError("truncation_horizon: requires eta_bp > 0");
    if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw DomainError("truncation_horizon: tail_tol must lie in (0, 1)");
    const double eps = eta_bp / 10.0;
    return std::log(1.0 / tail_tol) / (0.5 * p * (eta_bp - eps));
}

}  // namespace jumpctl
