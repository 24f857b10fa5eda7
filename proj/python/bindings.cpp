#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jumpctl/cli.hpp"
#include "jumpctl/hjb.hpp"
#include "jumpctl/models.hpp"
#include "jumpctl/serialize.hpp"
#include "jumpctl/verify.hpp"

namespace py = pybind11;
using namespace jumpctl;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
Json from_py(const py::object& o) { return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>()); }

std::vector<JumpAtom> atoms_from(const std::vector<std::pair<double, double>>& rows) {
    std::vector<JumpAtom> out;
    for (const auto& [mark, rate] : rows) out.push_back({vec({mark}), rate});
    return out;
}

std::vector<std::pair<double, double>> atoms_to(const std::vector<JumpAtom>& atoms) {
    std::vector<std::pair<double, double>> out;
    for (const auto& a : atoms) out.emplace_back(a.mark(0), a.rate);
    return out;
}

py::array_t<double> matrix(const std::vector<double>& data, std::size_t rows, std::size_t cols) {
    py::array_t<double> a({rows, cols});
    std::copy(data.begin(), data.begin() + static_cast<long>(rows * cols), a.mutable_data());
    return a;
}

TimeGrid time_grid(double T, double dt) { return TimeGrid(0.0, T, dt); }

}  // namespace

PYBIND11_MODULE(_jumpctl, m) {
    m.doc() = "Jump-diffusion control toolkit: certificates, simulation, BSDE solvers, HJB and verification.";
    m.attr("__version__") = JUMPCTL_VERSION;

    py::register_exception<Error>(m, "Error");
    py::register_exception<cli::ConfigError>(m, "ConfigError");

    py::class_<Lin1Params>(m, "Lin1Params")
        .def(py::init<>())
        .def_readwrite("theta", &Lin1Params::theta)
        .def_readwrite("sigma1", &Lin1Params::sigma1)
        .def_readwrite("c", &Lin1Params::c)
        .def_readwrite("beta", &Lin1Params::beta)
        .def_readwrite("q", &Lin1Params::q)
        .def_readwrite("ubar", &Lin1Params::ubar)
        .def_property(
            "atoms", [](const Lin1Params& p) { return atoms_to(p.atoms); },
            [](Lin1Params& p, const std::vector<std::pair<double, double>>& rows) { p.atoms = atoms_from(rows); });

    py::class_<OuDecayParams>(m, "OuDecayParams")
        .def(py::init<>())
        .def_readwrite("theta", &OuDecayParams::theta)
        .def_readwrite("sigma", &OuDecayParams::sigma)
        .def_readwrite("c", &OuDecayParams::c)
        .def_readwrite("g0", &OuDecayParams::g0)
        .def_readwrite("decay", &OuDecayParams::decay)
        .def_readwrite("beta", &OuDecayParams::beta)
        .def_property(
            "atoms", [](const OuDecayParams& p) { return atoms_to(p.atoms); },
            [](OuDecayParams& p, const std::vector<std::pair<double, double>>& rows) { p.atoms = atoms_from(rows); });

    py::class_<ProblemSpec>(m, "Problem")
        .def_readonly("name", &ProblemSpec::name)
        .def_readonly("state_dim", &ProblemSpec::state_dim)
        .def_readonly("noise_dim", &ProblemSpec::noise_dim)
        .def_property_readonly("controls",
                               [](const ProblemSpec& s) {
                                   std::vector<double> u;
                                   for (const auto& p : s.controls.points()) u.push_back(p(0));
                                   return u;
                               })
        .def("__repr__", [](const ProblemSpec& s) { return "<Problem " + s.name + ">"; });

    m.def("make_lin1", &make_lin1, py::arg("params") = Lin1Params{});
    m.def("make_lin1_ctrl", &make_lin1_ctrl, py::arg("params") = Lin1Params{});
    m.def("make_lin1_controls", &make_lin1_controls, py::arg("params"), py::arg("controls"));
    m.def("make_ou_decay", &make_ou_decay, py::arg("params") = OuDecayParams{});
    m.def("lin1_ctrl_value", &lin1_ctrl_value, py::arg("params"), py::arg("x"));
    m.def("lin1_moment_rate", &lin1_moment_rate, py::arg("params"), py::arg("p"), py::arg("u") = 0.0);
    m.def("ou_decay_y", &ou_decay_y, py::arg("params"), py::arg("t"));

    m.def("c_p", &c_p, py::arg("p"));
    m.def("eta_bp", &eta_bp, py::arg("alpha_b"), py::arg("ell_sigma"), py::arg("L_gamma_2"), py::arg("L_gamma_p"),
          py::arg("p"));
    m.def(
        "certify", [](const ProblemSpec& s, double p) { return to_py(to_json(certify(s, p))); }, py::arg("problem"),
        py::arg("p") = 2.0, "Dissipativity certificate as a dict.");

    m.def(
        "simulate",
        [](const ProblemSpec& s, double x0, double T, double dt, std::size_t paths, std::uint64_t seed,
           std::size_t control, std::size_t substeps, std::size_t workers) {
            SimulationOptions o;
            o.substeps = substeps;
            o.workers = workers;
            const auto ens = simulate_forward(s, constant_control(control), vec({x0}), time_grid(T, dt), paths, seed, o);
            const std::size_t nodes = ens.grid().nodes();
            std::vector<double> states(paths * nodes), times(nodes);
            for (std::size_t p = 0; p < paths; ++p)
                for (std::size_t i = 0; i < nodes; ++i) states[p * nodes + i] = ens.state(p, i, 0);
            for (std::size_t i = 0; i < nodes; ++i) times[i] = ens.grid().time(i);
            py::dict out;
            out["times"] = py::array_t<double>(static_cast<py::ssize_t>(nodes), times.data());
            out["states"] = matrix(states, paths, nodes);
            out["diverged"] = ens.diverged_count();
            return out;
        },
        py::arg("problem"), py::arg("x0"), py::arg("T"), py::arg("dt"), py::arg("paths"), py::arg("seed"),
        py::arg("control") = 0, py::arg("substeps") = 1, py::arg("workers") = 1,
        "Forward ensemble under a constant control; states are paths x nodes.");

    m.def(
        "moment_curve",
        [](const ProblemSpec& s, double x0, double T, double dt, std::size_t paths, std::uint64_t seed, double p,
           std::size_t control, std::size_t substeps, std::size_t workers) {
            SimulationOptions o;
            o.substeps = substeps;
            o.workers = workers;
            const auto ens = simulate_forward(s, constant_control(control), vec({x0}), time_grid(T, dt), paths, seed, o);
            std::vector<std::tuple<double, double, double>> out;
            for (const auto& pt : moment_curve(ens, p)) out.emplace_back(pt.time, pt.value, pt.se);
            return out;
        },
        py::arg("problem"), py::arg("x0"), py::arg("T"), py::arg("dt"), py::arg("paths"), py::arg("seed"),
        py::arg("p") = 2.0, py::arg("control") = 0, py::arg("substeps") = 1, py::arg("workers") = 1,
        "List of (time, E|X|^p, se).");

    m.def("poisson_moment_oracle", [](double h, double T, double p, double rate) {
        return poisson_moment_oracle(LevyModel({{vec({1.0}), rate}}), h, T, p);
    }, py::arg("h"), py::arg("T"), py::arg("p"), py::arg("rate") = 1.0);

    m.def(
        "solve_bsde",
        [](const ProblemSpec& s, double x0, double T, double dt, std::size_t paths, std::uint64_t seed,
           const std::string& method, std::size_t control, double grid_lo, double grid_hi, std::size_t grid_nodes,
           std::size_t workers) {
            const auto law = constant_control(control);
            SimulationOptions so;
            so.workers = workers;
            const auto ens = simulate_forward(s, law, vec({x0}), time_grid(T, dt), paths, seed, so);
            BsdeOptions o;
            o.method = parse_method(method);
            o.grid = StateGrid::line(grid_lo, grid_hi, grid_nodes);
            o.workers = workers;
            const auto sol = solve_bsde(s, law, ens, o);
            py::dict out;
            out["y0"] = sol.y0.value;
            out["se"] = sol.y0.se;
            out["escape_fraction"] = sol.escape_fraction;
            std::vector<double> mean;
            for (std::size_t i = 0; i < sol.grid.nodes(); ++i) mean.push_back(sol.y_mean(i).value);
            out["y_mean"] = mean;
            return out;
        },
        py::arg("problem"), py::arg("x0"), py::arg("T"), py::arg("dt"), py::arg("paths"), py::arg("seed"),
        py::arg("method") = "lsmc", py::arg("control") = 0, py::arg("grid_lo") = -4.0, py::arg("grid_hi") = 4.0,
        py::arg("grid_nodes") = 129, py::arg("workers") = 1, "Y0 of the BSDE with zero terminal value.");

    py::class_<DiscreteValueFunction>(m, "ValueFunction")
        .def_property_readonly("x",
                               [](const DiscreteValueFunction& V) {
                                   std::vector<double> x;
                                   for (std::size_t i = 0; i < V.grid.size(); ++i) x.push_back(V.grid.point(i)(0));
                                   return x;
                               })
        .def_readonly("values", &DiscreteValueFunction::values)
        .def_readonly("policy", &DiscreteValueFunction::policy)
        .def_readonly("residual", &DiscreteValueFunction::residual)
        .def_readonly("iterations", &DiscreteValueFunction::iterations)
        .def_readonly("warnings", &DiscreteValueFunction::warnings)
        .def_property_readonly("max_residual", &DiscreteValueFunction::max_residual)
        .def("__call__", [](const DiscreteValueFunction& V, double x) { return V.value_at(vec({x})); })
        .def("properties", [](const DiscreteValueFunction& V) { return to_py(to_json(value_properties(V))); });

    m.def(
        "solve_hjb",
        [](const ProblemSpec& s, double lo, double hi, std::size_t nodes, double tol, double delta,
           std::size_t max_iters, std::size_t workers) {
            HjbOptions o;
            o.tol = tol;
            o.delta = delta;
            o.max_iters = max_iters;
            o.workers = workers;
            return solve_hjb(s, StateGrid::line(lo, hi, nodes), o);
        },
        py::arg("problem"), py::arg("lo") = -2.0, py::arg("hi") = 2.0, py::arg("nodes") = 257, py::arg("tol") = 1e-6,
        py::arg("delta") = 0.0, py::arg("max_iters") = 50, py::arg("workers") = 1);

    m.def(
        "run",
        [](const std::string& subcommand, const std::string& config_text, bool write_artifacts) {
            const auto cfg = cli::parse_config(config_text);
            const auto r = cli::run(subcommand, cfg, write_artifacts);
            return py::make_tuple(r.exit_code, to_py(r.summary));
        },
        py::arg("subcommand"), py::arg("config"), py::arg("write_artifacts") = false,
        "Runs a CLI subcommand on INI text; returns (exit_code, summary).");
    m.def(
        "replay",
        [](const py::object& summary, std::optional<std::size_t> workers) {
            const auto r = cli::replay(from_py(summary), workers);
            return py::make_tuple(r.match, r.message);
        },
        py::arg("summary"), py::arg("workers") = py::none());
}
