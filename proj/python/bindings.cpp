#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mvsde/config.hpp"
#include "mvsde/measures.hpp"

namespace py = pybind11;
using namespace mvsde;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array trajectory_array(const Trajectory& x) {
  Array a({x.grid().n_nodes(), x.dim()});
  std::copy(x.values().begin(), x.values().end(), a.mutable_data());
  return a;
}

Array bundle_array(const std::vector<Trajectory>& xs) {
  const std::size_t n = xs.empty() ? 0 : xs.front().grid().n_nodes();
  const std::size_t d = xs.empty() ? 0 : xs.front().dim();
  Array a({xs.size(), n, d});
  double* out = a.mutable_data();
  for (const auto& x : xs) out = std::copy(x.values().begin(), x.values().end(), out);
  return a;
}

py::dict bundle_dict(const SolutionBundle& b) {
  py::dict d;
  d["x"] = bundle_array(b.particles);
  d["k"] = bundle_array(b.k_processes);
  Array kv(static_cast<py::ssize_t>(b.k_variation.size()));
  std::copy(b.k_variation.begin(), b.k_variation.end(), kv.mutable_data());
  d["k_variation"] = kv;
  return d;
}

py::dict path_dict(const ReflectedPath& p) {
  py::dict d;
  d["x"] = trajectory_array(p.x);
  d["k"] = trajectory_array(p.k);
  d["k_variation"] = p.k_variation;
  return d;
}

Control to_control(const RunConfig& rc, const Array& u) {
  const auto& g = rc.sim.grid;
  const std::size_t m = rc.sim.noise_dim();
  if (u.ndim() == 0 || (u.ndim() == 1 && u.shape(0) == static_cast<py::ssize_t>(m))) {
    Vec v(u.data(), u.data() + u.size());
    if (v.size() == 1 && m > 1) v.assign(m, v[0]);
    return Control::constant(g.n_steps, g.h, v);
  }
  if (u.ndim() != 2 || u.shape(0) != static_cast<py::ssize_t>(g.n_steps) || u.shape(1) != static_cast<py::ssize_t>(m))
    throw py::value_error("control must have shape (" + std::to_string(g.n_steps) + ", " + std::to_string(m) +
                          ") or be a constant");
  return Control(g.n_steps, m, g.h, Vec(u.data(), u.data() + u.size()));
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Vec to_vec(const Array& a) { return Vec(a.data(), a.data() + a.size()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulation and asymptotics for path-dependent multivalued McKean-Vlasov SDEs";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<Error> mvsde_error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const Error& e) {
      py::set_error(mvsde_error, e.what());
    }
  });

  py::class_<RunConfig>(m, "Config")
      .def_property(
          "seed", [](const RunConfig& c) { return c.sim.seed; }, [](RunConfig& c, std::uint64_t s) { c.sim.seed = s; })
      .def_property(
          "particles", [](const RunConfig& c) { return c.sim.particles; },
          [](RunConfig& c, std::size_t p) {
            if (p == 0) throw py::value_error("particles must be positive");
            c.sim.particles = p;
          })
      .def_property(
          "epsilon", [](const RunConfig& c) { return c.sim.epsilon; },
          [](RunConfig& c, double e) {
            if (!(e >= 0.0)) throw py::value_error("epsilon must be nonnegative");
            c.sim.epsilon = e;
          })
      .def_property(
          "threads", [](const RunConfig& c) { return c.experiment.settings.threads; },
          [](RunConfig& c, std::size_t t) { c.experiment.settings.threads = std::max<std::size_t>(1, t); })
      .def_property_readonly("h", [](const RunConfig& c) { return c.sim.grid.h; })
      .def_property_readonly("n_steps", [](const RunConfig& c) { return c.sim.grid.n_steps; })
      .def_property_readonly("n_history", [](const RunConfig& c) { return c.sim.grid.n_history; })
      .def_property_readonly("dimension", [](const RunConfig& c) { return c.sim.dim(); })
      .def_property_readonly("noise_dimension", [](const RunConfig& c) { return c.sim.noise_dim(); })
      .def_property_readonly("preset", [](const RunConfig& c) { return c.preset; })
      .def_property_readonly("config_hash", [](const RunConfig& c) { return c.config_hash; })
      .def_property_readonly("document", [](const RunConfig& c) { return json_to_py(c.document); })
      .def_property_readonly("times",
                             [](const RunConfig& c) {
                               const auto& g = c.sim.grid;
                               Array t(static_cast<py::ssize_t>(g.n_nodes()));
                               for (std::size_t i = 0; i < g.n_nodes(); ++i) t.mutable_data()[i] = g.time_of_index(i);
                               return t;
                             })
      .def("__repr__", [](const RunConfig& c) {
        return "<mvsde.Config preset='" + c.preset + "' d=" + std::to_string(c.sim.dim()) +
               " steps=" + std::to_string(c.sim.grid.n_steps) + ">";
      });

  m.def(
      "load_config",
      [](const std::filesystem::path& path, std::optional<std::uint64_t> seed, std::optional<std::size_t> threads) {
        CliOverrides ov;
        ov.seed = seed;
        ov.threads = threads;
        return load_run_config(path, ov);
      },
      py::arg("path"), py::arg("seed") = py::none(), py::arg("threads") = py::none(), "Load a YAML run configuration.");
  m.def(
      "parse_config",
      [](const std::string& text, const std::filesystem::path& base_dir) { return parse_run_config(text, base_dir); },
      py::arg("text"), py::arg("base_dir") = std::filesystem::path("."), "Parse YAML config text.");
  m.def(
      "preset",
      [](const std::string& name) { return parse_run_config("problem: {preset: " + name + "}\n", "."); },
      py::arg("name"));
  m.def("preset_names", &preset_names);

  m.def(
      "simulate",
      [](const RunConfig& c, const std::string& system, std::optional<Array> control) -> py::dict {
        const auto& sim = c.sim;
        py::gil_scoped_release nogil;
        if (system == "perturbed") {
          auto b = simulate_perturbed(sim);
          py::gil_scoped_acquire gil;
          return bundle_dict(b);
        }
        if (system == "controlled" || system == "mdp_controlled") {
          py::gil_scoped_acquire gil;
          if (!control) throw py::value_error("system '" + system + "' needs a control");
          const auto u = to_control(c, *control);
          SolutionBundle b;
          {
            py::gil_scoped_release again;
            if (system == "controlled") {
              b = simulate_controlled(sim, u);
            } else {
              b = simulate_mdp_deviation(sim, solve_deterministic_limit(sim).x, u).first;
            }
          }
          return bundle_dict(b);
        }
        if (system == "mdp") {
          auto b = simulate_mdp_deviation(sim, solve_deterministic_limit(sim).x);
          py::gil_scoped_acquire gil;
          return bundle_dict(b);
        }
        if (system == "clt") {
          auto [ze, z] = simulate_clt_pair(sim, solve_deterministic_limit(sim).x);
          py::gil_scoped_acquire gil;
          py::dict d;
          d["z_eps"] = bundle_array(ze.particles);
          d["z"] = bundle_array(z.particles);
          return d;
        }
        py::gil_scoped_acquire gil;
        throw py::value_error("system must be perturbed, controlled, mdp, mdp_controlled or clt");
      },
      py::arg("config"), py::arg("system") = "perturbed", py::arg("control") = py::none(),
      "Simulate a particle system. Arrays have shape (particles, nodes, d).");

  m.def(
      "deterministic_limit", [](const RunConfig& c) { return path_dict(solve_deterministic_limit(c.sim)); },
      py::arg("config"));
  m.def(
      "skeleton",
      [](const RunConfig& c, const Array& control, const std::string& kind) {
        const auto u = to_control(c, control);
        const auto x0 = solve_deterministic_limit(c.sim).x;
        return path_dict(skeleton_kind_from_string(kind) == SkeletonKind::ldp ? solve_skeleton(c.sim, u, x0)
                                                                              : solve_mdp_skeleton(c.sim, u, x0));
      },
      py::arg("config"), py::arg("control"), py::arg("kind") = "ldp");

  m.def(
      "rate",
      [](const RunConfig& c, std::optional<Array> target, const std::string& kind, const std::string& method,
         double tolerance, bool warm_start) {
        auto rc = c;
        rc.rate.kind = skeleton_kind_from_string(kind);
        Trajectory g;
        if (target) {
          const auto& t = *target;
          if (t.size() != static_cast<py::ssize_t>(rc.sim.grid.n_nodes() * rc.sim.dim()))
            throw py::value_error("target must have shape (nodes, d) = (" + std::to_string(rc.sim.grid.n_nodes()) + ", " +
                                  std::to_string(rc.sim.dim()) + ")");
          g = Trajectory(rc.sim.grid, rc.sim.dim(), to_vec(t));
        } else {
          g = build_rate_target(rc);
        }
        auto p = make_rate_problem(rc.sim, g, rc.rate.kind);
        p.tolerance = tolerance;
        p.optimizer = rc.rate.optimizer;
        p.optimizer.warm_start = warm_start;
        p.threads = rc.experiment.settings.threads;
        RateResult r;
        {
          py::gil_scoped_release nogil;
          r = method == "inversion" ? rate_by_inversion(p) : method == "penalty" ? rate_by_penalty(p) : evaluate_rate(p);
        }
        py::dict d;
        d["value"] = r.value;
        d["method"] = r.method;
        d["residual"] = r.residual;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        Array u({r.control.steps(), r.control.dim()});
        std::copy(r.control.values().begin(), r.control.values().end(), u.mutable_data());
        d["control"] = u;
        return d;
      },
      py::arg("config"), py::arg("target") = py::none(), py::arg("kind") = "ldp", py::arg("method") = "auto",
      py::arg("tolerance") = 1e-4, py::arg("warm_start") = true,
      "Rate function at `target` (default: the configured rate target).");

  m.def(
      "experiment",
      [](const RunConfig& c, const std::string& kind, std::optional<std::vector<double>> eps_grid,
         std::optional<std::size_t> replicas_per_batch) {
        auto e = c.experiment;
        if (eps_grid) e.eps_grid = *eps_grid;
        if (replicas_per_batch) e.settings.replicas_per_batch = *replicas_per_batch;
        ExperimentReport r;
        {
          py::gil_scoped_release nogil;
          if (kind == "lln")
            r = lln_experiment(c.sim, e.eps_grid, e.settings);
          else if (kind == "mdp")
            r = mdp_experiment(c.sim, e.eps_grid, e.settings);
          else if (kind == "clt")
            r = clt_scaling_experiment(c.sim, e.eps_grid, e.settings);
          else if (kind == "skeleton")
            r = skeleton_continuity_check(c.sim,
                                          e.base_control ? e.base_control->build(c.sim.grid, c.sim.noise_dim())
                                                         : Control::zero(c.sim.grid.n_steps, c.sim.noise_dim(), c.sim.grid.h),
                                          e.continuity);
          else
            throw PreconditionError("kind must be lln, mdp, clt or skeleton");
        }
        return json_to_py(r.to_json());
      },
      py::arg("config"), py::arg("kind"), py::arg("eps_grid") = py::none(), py::arg("replicas_per_batch") = py::none());

  m.def(
      "resolvent",
      [](const std::string& operator_json, double lambda, const Array& x) {
        const auto op = operator_from_json(nlohmann::json::parse(operator_json), static_cast<std::size_t>(x.size()));
        const auto y = op->resolvent(lambda, to_vec(x));
        Array out(static_cast<py::ssize_t>(y.size()));
        std::copy(y.begin(), y.end(), out.mutable_data());
        return out;
      },
      py::arg("operator"), py::arg("lam"), py::arg("x"), "J_lambda(x) for an operator given as a JSON record.");

  m.def(
      "w2",
      [](const Array& a, const Array& b, double h) {
        if (a.ndim() != 3 || b.ndim() != 3) throw py::value_error("expected arrays of shape (atoms, nodes, d)");
        auto views = [h](const Array& x, std::vector<Vec>& store) {
          std::vector<Segment> out;
          const std::size_t n = x.shape(1) * x.shape(2);
          for (py::ssize_t i = 0; i < x.shape(0); ++i) store.emplace_back(x.data() + i * n, x.data() + (i + 1) * n);
          for (const auto& v : store) out.emplace_back(v, static_cast<std::size_t>(x.shape(2)), h);
          return out;
        };
        std::vector<Vec> sa, sb;
        sa.reserve(a.shape(0));
        sb.reserve(b.shape(0));
        const EmpiricalMeasure mu(views(a, sa)), nu(views(b, sb));
        return w2_assignment(mu, nu);
      },
      py::arg("a"), py::arg("b"), py::arg("h") = 1.0, "W2 between equal-size empirical measures of segments.");

  m.attr("__version__") = MVSDE_VERSION;
}
