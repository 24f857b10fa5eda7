#include "jumpctl/cli.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace jumpctl::cli {

namespace {

using LineMap = std::map<std::pair<std::string, std::string>, int>;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Positions of "key = value" lines per section, for diagnostics.
LineMap scan_lines(std::string_view text) {
    LineMap lines;
    std::string section;
    int n = 0;
    std::istringstream is{std::string(text)};
    for (std::string line; std::getline(is, line);) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq != std::string::npos) lines[{section, trim(std::string_view(t).substr(0, eq))}] = n;
    }
    return lines;
}

/// Typed, range-checked access to the section values.
class Reader {
public:
    Reader(const Sections& v, const LineMap* lines, std::string origin)
        : v_(v), lines_(lines), origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& sec, const std::string& key, const std::string& what) const {
        std::string where;
        if (lines_) {
            const auto it = lines_->find({sec, key});
            if (it != lines_->end()) where = origin_ + ":" + std::to_string(it->second) + ": ";
        }
        throw ConfigError(where + "[" + sec + "] " + key, what);
    }

    const std::string& text(const std::string& sec, const std::string& key) const {
        return v_.at(sec).at(key);
    }

    double real(const std::string& sec, const std::string& key) const {
        return parse_real(sec, key, text(sec, key));
    }
    double positive(const std::string& sec, const std::string& key) const {
        const double x = real(sec, key);
        if (!(x > 0.0)) fail(sec, key, "must be > 0 (got " + text(sec, key) + ")");
        return x;
    }
    double nonnegative(const std::string& sec, const std::string& key) const {
        const double x = real(sec, key);
        if (!(x >= 0.0)) fail(sec, key, "must be >= 0 (got " + text(sec, key) + ")");
        return x;
    }
    std::uint64_t u64(const std::string& sec, const std::string& key) const {
        const std::string& s = text(sec, key);
        std::uint64_t x = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty())
            fail(sec, key, "expected a nonnegative integer (got '" + s + "')");
        return x;
    }
    std::size_t count(const std::string& sec, const std::string& key, std::size_t lo, std::size_t hi) const {
        const auto x = u64(sec, key);
        if (x < lo || x > hi)
            fail(sec, key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "] (got " +
                               text(sec, key) + ")");
        return static_cast<std::size_t>(x);
    }
    bool boolean(const std::string& sec, const std::string& key) const {
        std::string s = text(sec, key);
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        fail(sec, key, "expected true or false (got '" + text(sec, key) + "')");
    }
    std::string choice(const std::string& sec, const std::string& key, std::initializer_list<const char*> allowed) const {
        const std::string& s = text(sec, key);
        std::string list;
        for (const char* a : allowed) {
            if (s == a) return s;
            list += (list.empty() ? "" : ", ") + std::string(a);
        }
        fail(sec, key, "expected one of {" + list + "} (got '" + s + "')");
    }
    /// Comma-separated scalars; empty text gives an empty list.
    std::vector<double> reals(const std::string& sec, const std::string& key) const {
        std::vector<double> out;
        if (trim(text(sec, key)).empty()) return out;
        for (const auto& item : split(text(sec, key), ',')) out.push_back(parse_real(sec, key, item));
        return out;
    }
    /// Comma-separated rows of whitespace-separated scalars.
    std::vector<std::vector<double>> rows(const std::string& sec, const std::string& key) const {
        std::vector<std::vector<double>> out;
        if (trim(text(sec, key)).empty()) return out;
        for (const auto& row : split(text(sec, key), ',')) {
            std::vector<double> r;
            std::istringstream is(row);
            for (std::string tok; is >> tok;) r.push_back(parse_real(sec, key, tok));
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    double parse_real(const std::string& sec, const std::string& key, const std::string& s) const {
        const std::string t = trim(s);
        char* end = nullptr;
        errno = 0;
        const double x = std::strtod(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(x))
            fail(sec, key, "expected a finite number (got '" + t + "')");
        return x;
    }

    const Sections& v_;
    const LineMap* lines_;
    std::string origin_;
};

ExperimentConfig build(const Sections& given, const LineMap* lines, const std::string& origin) {
    const Sections& defaults = default_sections();
    ExperimentConfig cfg;
    cfg.values = defaults;
    for (const auto& [sec, keys] : given) {
        const auto s = defaults.find(sec);
        if (s == defaults.end()) {
            std::string where = "[" + sec + "]";
            throw ConfigError(where, "unknown section");
        }
        for (const auto& [key, value] : keys) {
            if (!s->second.count(key)) Reader(given, lines, origin).fail(sec, key, "unknown key");
            cfg.values[sec][key] = trim(value);
        }
    }
    const Reader r(cfg.values, lines, origin);

    cfg.family = r.choice("model", "family", {"LIN1", "LIN1-CTRL", "OU-DECAY"});
    std::vector<JumpAtom> atoms;
    for (const auto& row : r.rows("levy", "atoms")) {
        if (row.size() < 2) r.fail("levy", "atoms", "each atom needs mark components and a rate");
        const double rate = row.back();
        if (!(rate > 0.0)) r.fail("levy", "atoms", "atom rates must be > 0");
        atoms.push_back({vec_from(std::span(row).first(row.size() - 1)), rate});
    }
    auto& l = cfg.lin1;
    l.theta = r.real("model", "theta");
    l.sigma1 = r.real("model", "sigma1");
    l.c = r.real("model", "c");
    l.beta = r.positive("model", "beta");
    l.q = r.real("model", "q");
    l.ubar = r.nonnegative("model", "ubar");
    l.atoms = atoms;
    auto& o = cfg.ou;
    o.theta = r.real("model", "theta");
    o.sigma = r.real("model", "sigma");
    o.c = r.real("model", "c");
    o.g0 = r.real("model", "g0");
    o.decay = r.nonnegative("model", "decay");
    o.beta = r.positive("model", "beta");
    o.atoms = atoms;

    cfg.controls = r.reals("controls", "points");
    if (!cfg.controls.empty() && cfg.family != "LIN1-CTRL")
        r.fail("controls", "points", "a control grid is only configurable for LIN1-CTRL");
    if (cfg.controls.empty()) cfg.controls = cfg.family == "LIN1-CTRL" ? std::vector<double>{0.0, l.ubar}
                                                                       : std::vector<double>{0.0};

    auto& n = cfg.numerics;
    n.dt = r.positive("numerics", "dt");
    n.T = r.positive("numerics", "T");
    if (n.dt > n.T) r.fail("numerics", "dt", "must not exceed T");
    n.substeps = r.count("numerics", "substeps", 1, 100000);
    n.paths = r.count("numerics", "paths", 2, 100000000);
    cfg.x0 = r.real("numerics", "x0");
    const double lo = r.real("numerics", "grid_lo"), hi = r.real("numerics", "grid_hi");
    if (!(lo < hi)) r.fail("numerics", "grid_hi", "must exceed grid_lo");
    const auto nodes = r.count("numerics", "grid_nodes", 8, 1000000);
    try {
        cfg.grid = StateGrid::line(lo, hi, nodes);
    } catch (const DomainError& e) {
        r.fail("numerics", "grid_nodes", e.what());
    }
    n.bsde.method = parse_method(r.choice("numerics", "method", {"lsmc", "markovian"}));
    n.bsde.lsmc_degree = r.count("numerics", "lsmc_degree", 1, 6);
    n.bsde.ridge = r.nonnegative("numerics", "ridge");
    n.bsde.quadrature_points = r.count("numerics", "quadrature_points", 1, 40);
    n.bsde.grid = cfg.grid;

    cfg.seed = r.u64("run", "seed");
    cfg.out = r.text("run", "out");
    if (cfg.out.empty()) r.fail("run", "out", "must not be empty");
    cfg.workers = r.count("run", "workers", 1, 1024);
    cfg.strict = r.boolean("run", "strict");
    n.seed = cfg.seed;
    n.workers = cfg.workers;
    n.bsde.workers = cfg.workers;

    cfg.certify.p = r.reals("certify", "p");
    if (cfg.certify.p.empty()) r.fail("certify", "p", "needs at least one exponent");
    for (double p : cfg.certify.p)
        if (!(p >= 2.0)) r.fail("certify", "p", "exponents must be >= 2");
    cfg.certify.samples = r.count("certify", "samples", 0, 10000000);

    const std::size_t controls = cfg.controls.size();
    auto& s = cfg.simulate;
    s.control = r.count("simulate", "control", 0, controls - 1);
    s.p = r.positive("simulate", "p");
    if (s.p < 2.0) r.fail("simulate", "p", "must be >= 2");
    s.epsilon = r.positive("simulate", "epsilon");
    s.probe_time = r.nonnegative("simulate", "probe_time");
    if (s.probe_time > n.T) r.fail("simulate", "probe_time", "must not exceed [numerics] T");
    s.csv_paths = r.count("simulate", "csv_paths", 0, 100000000);
    s.admissibility = r.boolean("simulate", "admissibility");

    auto& b = cfg.bsde;
    b.backends = r.choice("bsde", "backends", {"lsmc", "markovian", "both"});
    b.control = r.count("bsde", "control", 0, controls - 1);
    b.p = r.positive("bsde", "p");
    if (b.p < 2.0) r.fail("bsde", "p", "must be >= 2");
    b.picard = r.boolean("bsde", "picard");

    auto& h = cfg.hjb;
    h.tol = r.positive("hjb", "tol");
    h.delta = r.nonnegative("hjb", "delta");
    h.max_iters = r.count("hjb", "max_iters", 1, 100000);
    h.closed_form = r.boolean("hjb", "closed_form");
    h.closed_form_tol = r.positive("hjb", "closed_form_tol");

    auto& d = cfg.dpp;
    d.t = r.positive("dpp", "t");
    d.points = r.reals("dpp", "points");
    if (d.points.empty()) r.fail("dpp", "points", "needs at least one point");
    d.tol = r.positive("dpp", "tol");

    auto& v = cfg.verify;
    v.mode = r.choice("verify", "mode", {"classical", "viscosity", "both"});
    v.points = r.reals("verify", "points");
    if (v.points.empty() && v.mode != "viscosity") r.fail("verify", "points", "needs at least one point");
    v.random_policies = r.count("verify", "random_policies", 0, 100000);
    v.classical_rel_tol = r.positive("verify", "classical_rel_tol");
    v.viscosity_rel_tol = r.positive("verify", "viscosity_rel_tol");
    v.viscosity_x0 = r.real("verify", "viscosity_x0");
    v.horizon = r.positive("verify", "horizon");
    v.policy = r.text("verify", "policy");
    if (v.policy != "optimal") {
        std::size_t idx = 0;
        const auto res = std::from_chars(v.policy.data(), v.policy.data() + v.policy.size(), idx);
        if (res.ec != std::errc() || res.ptr != v.policy.data() + v.policy.size() || idx >= controls)
            r.fail("verify", "policy", "expected 'optimal' or a control index below " + std::to_string(controls));
    }

    try {
        build_problem(cfg);
    } catch (const DomainError& e) {
        r.fail("model", "family", e.what());
    }
    return cfg;
}

}  // namespace

const Sections& default_sections() {
    static const Sections s{
        {"model",
         {{"family", "LIN1-CTRL"},
          {"theta", "1"},
          {"sigma1", "0.5"},
          {"sigma", "0.5"},
          {"c", "0.5"},
          {"beta", "1"},
          {"q", "1"},
          {"ubar", "1"},
          {"g0", "1"},
          {"decay", "1"}}},
        {"levy", {{"atoms", "1 0.5, -1 0.5"}}},
        {"controls", {{"points", ""}}},
        {"numerics",
         {{"dt", "0.02"},
          {"T", "10"},
          {"substeps", "1"},
          {"paths", "10000"},
          {"x0", "1"},
          {"grid_lo", "-2"},
          {"grid_hi", "2"},
          {"grid_nodes", "257"},
          {"method", "lsmc"},
          {"lsmc_degree", "3"},
          {"ridge", "1e-8"},
          {"quadrature_points", "7"}}},
        {"run", {{"seed", "1"}, {"out", "out"}, {"workers", "1"}, {"strict", "false"}}},
        {"certify", {{"p", "2"}, {"samples", "1000"}}},
        {"simulate",
         {{"control", "0"},
          {"p", "2"},
          {"epsilon", "0.15"},
          {"probe_time", "1"},
          {"csv_paths", "10"},
          {"admissibility", "false"}}},
        {"bsde", {{"backends", "lsmc"}, {"control", "0"}, {"p", "2"}, {"picard", "false"}}},
        {"hjb",
         {{"tol", "1e-6"}, {"delta", "0"}, {"max_iters", "50"}, {"closed_form", "true"}, {"closed_form_tol", "0.01"}}},
        {"dpp", {{"t", "0.5"}, {"points", "-1, 1"}, {"tol", "0.02"}}},
        {"verify",
         {{"mode", "both"},
          {"points", "-1, 1"},
          {"random_policies", "10"},
          {"classical_rel_tol", "0.02"},
          {"viscosity_rel_tol", "0.05"},
          {"viscosity_x0", "1"},
          {"horizon", "1"},
          {"policy", "optimal"}}},
    };
    return s;
}

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream is{std::string(text)};
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ":" + std::to_string(e.line()), e.message());
    }
    const LineMap lines = scan_lines(text);
    Sections given;
    for (const auto& [name, node] : tree) {
        if (node.empty() && !node.data().empty()) {
            const auto it = lines.find({"", name});
            const std::string where = it != lines.end() ? origin + ":" + std::to_string(it->second) : origin;
            throw ConfigError(where, "key '" + name + "' appears before any [section]");
        }
        auto& sec = given[name];
        for (const auto& [key, leaf] : node) {
            if (!leaf.empty()) throw ConfigError(origin, "nested keys are not supported");
            sec[key] = leaf.data();
        }
    }
    return build(given, &lines, origin);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

ExperimentConfig config_from_sections(const Sections& values) { return build(values, nullptr, "<sections>"); }

ExperimentConfig with_value(const ExperimentConfig& cfg, const std::string& section, const std::string& key,
                            const std::string& value) {
    Sections v = cfg.values;
    v[section][key] = value;
    return config_from_sections(v);
}

Json sections_to_json(const Sections& s) {
    Json j = Json::object();
    for (const auto& [sec, keys] : s) {
        Json o = Json::object();
        for (const auto& [k, v] : keys) o[k] = v;
        j[sec] = o;
    }
    return j;
}

Sections sections_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config", "expected an object of sections");
    Sections s;
    for (const auto& [sec, keys] : j.items()) {
        if (!keys.is_object()) throw ConfigError("[" + sec + "]", "expected an object of keys");
        for (const auto& [k, v] : keys.items()) {
            if (!v.is_string()) throw ConfigError("[" + sec + "] " + k, "expected a string value");
            s[sec][k] = v.get<std::string>();
        }
    }
    return s;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::string canon;
    for (const auto& [sec, keys] : cfg.values)
        for (const auto& [k, v] : keys) {
            if (sec == "run" && (k == "out" || k == "workers")) continue;
            canon += sec + "." + k + "=" + v + "\n";
        }
    return fnv1a(canon);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ProblemSpec build_problem(const ExperimentConfig& cfg) {
    if (cfg.family == "LIN1") return make_lin1(cfg.lin1);
    if (cfg.family == "LIN1-CTRL") return make_lin1_controls(cfg.lin1, cfg.controls);
    return make_ou_decay(cfg.ou);
}

}  // namespace jumpctl::cli
