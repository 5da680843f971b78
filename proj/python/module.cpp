#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "riccilab/diagnostics.hpp"
#include "riccilab/flow.hpp"
#include "riccilab/flowstore.hpp"
#include "riccilab/functionals.hpp"
#include "riccilab/geometry.hpp"
#include "riccilab/heatflow.hpp"
#include "riccilab/lgeodesics.hpp"
#include "riccilab/metric_io.hpp"
#include "riccilab/monitors.hpp"
#include "riccilab/scenario.hpp"

namespace py = pybind11;
using namespace riccilab;

namespace {

py::dict entropy_dict(const EntropyReport& r) {
  py::dict d;
  d["value"] = r.value;
  d["tau"] = r.tau;
  d["minimizer"] = r.minimizer ? py::cast(r.minimizer->values) : py::none();
  d["constraint_residual"] = r.constraint_residual;
  d["iterations"] = r.iterations;
  return d;
}

ScalarField potential(std::vector<double> f) { return ScalarField{std::move(f), FieldRole::potential}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ricci flow on warped products phi^2 dx^2 + psi^2 g_sphere";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ConstructionError>(m, "ConstructionError", base.ptr());
  py::register_exception<NearSingularError>(m, "NearSingularError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<WarpedMetric>(m, "WarpedMetric")
      .def(py::init([](int n, const std::string& topology, std::vector<double> x, std::vector<double> phi,
                       std::vector<double> psi) {
             WarpedMetric g{n, topology_from_string(topology), std::move(x), std::move(phi), std::move(psi)};
             validate(g);
             return g;
           }),
           py::arg("n"), py::arg("topology"), py::arg("x"), py::arg("phi"), py::arg("psi"))
      .def_readonly("n", &WarpedMetric::n)
      .def_property_readonly("topology", [](const WarpedMetric& g) { return to_string(g.topology); })
      .def_readonly("x", &WarpedMetric::x)
      .def_readonly("phi", &WarpedMetric::phi)
      .def_readonly("psi", &WarpedMetric::psi)
      .def("__len__", &WarpedMetric::size)
      .def("__repr__", [](const WarpedMetric& g) {
        return "<WarpedMetric n=" + std::to_string(g.n) + " " + to_string(g.topology) +
               " m=" + std::to_string(g.size()) + ">";
      });

  m.def("round_sphere", &build_round_sphere, py::arg("n") = 3, py::arg("radius") = 1.0, py::arg("m") = 256);
  m.def("dumbbell", &build_dumbbell, py::arg("n") = 3, py::arg("neck_radius") = 0.5, py::arg("bump_radius") = 1.0,
        py::arg("m") = 256);
  m.def("cylinder", &build_cylinder, py::arg("n") = 3, py::arg("radius") = 1.0, py::arg("length") = 6.283185307179586,
        py::arg("m") = 256);
  m.def("flat_ball", &build_flat_ball, py::arg("n") = 3, py::arg("radius") = 1.0, py::arg("m") = 256);
  m.def("scaled", &scaled, py::arg("g"), py::arg("c"));
  m.def("curvature", [](const WarpedMetric& g) {
    const CurvatureField c = curvature(g);
    py::dict d;
    d["K_rad"] = c.K_rad;
    d["K_sph"] = c.K_sph;
    d["Ric_rad"] = c.Ric_rad;
    d["Ric_sph"] = c.Ric_sph;
    d["R"] = c.R;
    return d;
  });
  m.def("volume", [](const WarpedMetric& g) { return total_volume(analyze(g)); });
  m.def("arclength", &arclength);
  m.def("read_metric", [](const std::filesystem::path& p) {
    const auto l = read_metric(p);
    return py::make_tuple(l.metric, l.time);
  });
  m.def("write_metric", &write_metric, py::arg("path"), py::arg("g"), py::arg("time") = 0.0);

  py::class_<FlowHistory>(m, "FlowHistory")
      .def("__len__", &FlowHistory::size)
      .def_property_readonly("times", &FlowHistory::times)
      .def_property_readonly("n", &FlowHistory::n)
      .def("snapshot", &FlowHistory::snapshot, py::arg("k"))
      .def("at", &FlowHistory::at, py::arg("t"))
      .def_property_readonly("status", [](const FlowHistory& h) {
        return h.termination ? h.termination->status : std::string("ok");
      })
      .def_property_readonly("reason", [](const FlowHistory& h) {
        return h.termination ? h.termination->reason : std::string();
      });

  m.def(
      "run_flow",
      [](const WarpedMetric& g, double t_end, double cfl, std::size_t store_every, double regrid_threshold) {
        FlowOptions o;
        o.t_end = t_end;
        o.cfl = cfl;
        o.store_every = store_every;
        o.regrid_threshold = regrid_threshold;
        py::gil_scoped_release release;
        return run(g, o);
      },
      py::arg("g"), py::arg("t_end"), py::arg("cfl") = 0.5, py::arg("store_every") = 10,
      py::arg("regrid_threshold") = 10.0);
  m.def("save_history", &save_history, py::arg("h"), py::arg("dir"));
  m.def("load_history", [](const std::filesystem::path& dir) { return load_history(dir); }, py::arg("dir"));

  m.def("lambda_", [](const WarpedMetric& g) { return entropy_dict(lambda(g)); }, py::arg("g"));
  m.def("lambda_bar", &lambda_bar, py::arg("g"));
  m.def("mu", [](const WarpedMetric& g, double tau) { return entropy_dict(mu(g, tau)); }, py::arg("g"),
        py::arg("tau"));
  m.def(
      "nu",
      [](const WarpedMetric& g, int jobs) {
        NuOptions o;
        o.jobs = jobs;
        const auto r = nu(g, o);
        return py::make_tuple(r.value, r.tau);
      },
      py::arg("g"), py::arg("jobs") = 1);
  m.def("F", [](const WarpedMetric& g, std::vector<double> f) { return eval_F(g, potential(std::move(f))); },
        py::arg("g"), py::arg("f"));
  m.def(
      "W",
      [](const WarpedMetric& g, std::vector<double> f, double tau) {
        return eval_W(g, potential(std::move(f)), tau).value;
      },
      py::arg("g"), py::arg("f"), py::arg("tau"));

  m.def(
      "monitor",
      [](const FlowHistory& h, const std::string& which, py::kwargs kw) {
        MonitorConfig c;
        c.which = monitor_from_string(which);
        for (auto [key, value] : kw) {
          const auto k = key.cast<std::string>();
          if (k == "every") c.every = value.cast<std::size_t>();
          else if (k == "tau_terminal") c.tau_terminal = value.cast<double>();
          else if (k == "f_terminal") c.f_terminal = value.cast<std::string>();
          else if (k == "tau_lo") c.tau_lo = value.cast<double>();
          else if (k == "tau_hi") c.tau_hi = value.cast<double>();
          else if (k == "tau_count") c.tau_count = value.cast<int>();
          else if (k == "fan_size") c.lgeo.fan_size = value.cast<int>();
          else if (k == "ode_steps") c.lgeo.ode_steps = value.cast<int>();
          else if (k == "c1") c.c1 = value.cast<double>();
          else if (k == "c2") c.c2 = value.cast<double>();
          else throw ParameterError("unknown monitor option '" + k + "'");
        }
        MonitorSeries s;
        {
          py::gil_scoped_release release;
          s = record(h, c);
        }
        py::dict d;
        d["t"] = s.t;
        d["value"] = s.value;
        d["dvalue_dt"] = s.dvalue_dt;
        d["predicted_rhs"] = s.predicted_rhs;
        d["slack"] = s.slack;
        d["verdict"] = s.verdict;
        d["overall"] = s.overall;
        return d;
      },
      py::arg("h"), py::arg("which"));

  m.def(
      "reduced_volume",
      [](const FlowHistory& h, double t0, std::vector<double> taus, int fan_size, int ode_steps) {
        LOptions o;
        o.fan_size = fan_size;
        o.ode_steps = ode_steps;
        LFan fan;
        {
          py::gil_scoped_release release;
          fan = shoot_fan(h, t0, taus, o);
        }
        py::list rows;
        for (std::size_t k = 0; k < fan.fields.size(); ++k) {
          const auto& f = fan.fields[k];
          py::dict d;
          d["tau"] = fan.taus[k];
          d["vtilde"] = reduced_volume(f, f.g, o.coverage_threshold).value;
          d["vtilde_transport"] = fan.vtilde_transport[k];
          d["coverage"] = f.coverage;
          d["min_l"] = f.min_l;
          rows.append(d);
        }
        return rows;
      },
      py::arg("h"), py::arg("t0"), py::arg("taus"), py::arg("fan_size") = 256, py::arg("ode_steps") = 800);

  m.def(
      "harnack",
      [](const FlowHistory& h, double T, double width) {
        const auto sol = solve_conjugate(h, T, width);
        const auto fields = harnack_v(h, sol);
        py::dict d;
        std::vector<double> t, max_v, min_vu, max_vu;
        for (const auto& f : fields) {
          t.push_back(f.t);
          max_v.push_back(f.max_v);
          min_vu.push_back(f.min_v_over_u);
          max_vu.push_back(f.max_v_over_u);
        }
        d["t"] = t;
        d["mass"] = sol.mass;
        d["max_v"] = max_v;
        d["min_v_over_u"] = min_vu;
        d["max_v_over_u"] = max_vu;
        return d;
      },
      py::arg("h"), py::arg("T"), py::arg("width") = 0.0);

  m.def(
      "kappa",
      [](const WarpedMetric& g, double rho) {
        const auto r = kappa_scan(g, rho);
        return py::make_tuple(r.kappa, r.radius, g.x[r.center]);
      },
      py::arg("g"), py::arg("rho"));
  m.def(
      "necks",
      [](const WarpedMetric& g, double eps) {
        py::list out;
        for (const auto& c : neck_detect(g, eps)) out.append(py::make_tuple(c.x, c.closeness));
        return out;
      },
      py::arg("g"), py::arg("eps") = 0.05);

  m.def(
      "run_scenario",
      [](const std::filesystem::path& file, const std::filesystem::path& out, int jobs) {
        ScenarioOutcome o;
        {
          py::gil_scoped_release release;
          o = run_scenario(file, out, jobs);
        }
        py::dict d;
        d["name"] = o.name;
        d["verdict"] = o.verdict;
        d["config_hash"] = o.config_hash;
        d["report"] = o.report;
        d["outputs"] = o.outputs;
        return d;
      },
      py::arg("file"), py::arg("out"), py::arg("jobs") = 1);

  m.attr("__version__") = RICCILAB_VERSION;
}
