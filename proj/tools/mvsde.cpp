// mvsde: batch front-end for simulation, rate and experiment runs.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mvsde/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvsde;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfig = 2;

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string numbered(const std::string& stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%05zu.csv", i);
  return stem + buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Loads a YAML config, or replays the config stored in a manifest.
RunConfig load(const fs::path& path, CliOverrides ov) {
  if (path.extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read manifest " + path.string(), 0);
    json m;
    try {
      in >> m;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("manifest: ") + e.what(), 0);
    }
    if (!m.contains("config_text") || !m.contains("seed")) throw ConfigError("manifest lacks config_text or seed", 0);
    if (!ov.seed) ov.seed = m["seed"].get<std::uint64_t>();
    if (!ov.out) ov.out = path.parent_path();
    const fs::path base = m.value("config_dir", path.parent_path().string());
    auto rc = parse_run_config(m["config_text"].get<std::string>(), base, ov);
    rc.source = m.value("config_path", path.string());
    return rc;
  }
  return load_run_config(path, ov);
}

void write_manifest(const RunConfig& rc, const std::string& command) {
  fs::create_directories(rc.output_dir);
  json m;
  m["toolkit"] = "mvsde";
  m["version"] = MVSDE_VERSION;
  m["command"] = command;
  m["config_hash"] = hex64(rc.config_hash);
  m["seed"] = rc.sim.seed;
  m["threads"] = rc.experiment.settings.threads;
  m["config_path"] = fs::absolute(rc.source).string();
  m["config_dir"] = fs::absolute(rc.source).parent_path().string();
  m["config_text"] = rc.text;
  m["resolved_config"] = rc.document;
  write_json(rc.output_dir / "manifest.json", m);
}

void write_bundle(const fs::path& dir, const std::string& stem, const SolutionBundle& b, bool with_k) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    write_trajectory_csv((dir / numbered(stem, i)).string(), b.particles[i]);
    if (with_k && i < b.k_processes.size()) write_trajectory_csv((dir / numbered(stem + "_k", i)).string(), b.k_processes[i]);
  }
}

int cmd_simulate(const RunConfig& rc, std::string system) {
  const auto& sim = rc.sim;
  const auto dir = rc.output_dir;
  fs::create_directories(dir);
  json meta;
  meta["system"] = system;
  meta["seed"] = sim.seed;
  meta["particles"] = sim.particles;
  meta["epsilon"] = sim.epsilon;
  meta["config"] = rc.document;
  auto control = [&]() {
    if (!rc.simulate.control) throw ConfigError("simulate.control is required for system '" + system + "'", 0);
    return rc.simulate.control->build(sim.grid, sim.noise_dim());
  };
  auto summary = [&](const SolutionBundle& b) {
    double total = 0.0;
    for (double v : b.k_variation) total += v;
    meta["mean_k_variation"] = b.size() ? total / static_cast<double>(b.size()) : 0.0;
  };
  if (system == "perturbed") {
    const auto b = simulate_perturbed(sim);
    write_bundle(dir, "x", b, true);
    summary(b);
  } else if (system == "controlled") {
    const auto u = control();
    const auto b = simulate_controlled(sim, u);
    write_bundle(dir, "x", b, true);
    write_control_csv((dir / "control.csv").string(), u);
    summary(b);
  } else if (system == "limit") {
    const auto p = solve_deterministic_limit(sim);
    write_trajectory_csv((dir / "x.csv").string(), p.x);
    write_trajectory_csv((dir / "k.csv").string(), p.k);
    meta["k_variation"] = p.k_variation;
  } else if (system == "skeleton" || system == "mdp_skeleton") {
    const auto u = control();
    const auto x0 = solve_deterministic_limit(sim).x;
    const auto p = system == "skeleton" ? solve_skeleton(sim, u, x0) : solve_mdp_skeleton(sim, u, x0);
    write_trajectory_csv((dir / "x.csv").string(), p.x);
    write_trajectory_csv((dir / "k.csv").string(), p.k);
    write_control_csv((dir / "control.csv").string(), u);
    meta["k_variation"] = p.k_variation;
    meta["energy"] = u.energy();
  } else if (system == "mdp") {
    const auto x0 = solve_deterministic_limit(sim).x;
    if (rc.simulate.control) {
      const auto u = control();
      const auto [b, companion] = simulate_mdp_deviation(sim, x0, u);
      write_bundle(dir, "m", b, true);
      write_control_csv((dir / "control.csv").string(), u);
      summary(b);
    } else {
      const auto b = simulate_mdp_deviation(sim, x0);
      write_bundle(dir, "m", b, true);
      summary(b);
    }
    meta["a_eps"] = sim.mdp_scale();
  } else if (system == "clt") {
    const auto x0 = solve_deterministic_limit(sim).x;
    const auto [z_eps, z] = simulate_clt_pair(sim, x0);
    write_bundle(dir, "z_eps", z_eps, false);
    write_bundle(dir, "z", z, false);
  } else {
    throw ConfigError("unknown system '" + system + "'", 0);
  }
  write_json(dir / "metadata.json", meta);
  return kOk;
}

int cmd_rate(const RunConfig& rc) {
  const auto& r = rc.rate;
  auto problem = make_rate_problem(rc.sim, build_rate_target(rc), r.kind);
  problem.budget = r.budget;
  problem.tolerance = r.tolerance;
  problem.optimizer = r.optimizer;
  problem.threads = rc.experiment.settings.threads;
  RateResult res;
  json out;
  try {
    if (r.method == "inversion")
      res = rate_by_inversion(problem);
    else if (r.method == "penalty")
      res = rate_by_penalty(problem);
    else
      res = evaluate_rate(problem);
  } catch (const InversionUnavailable& e) {
    out["I_value"] = "inf";
    out["method"] = "inversion";
    out["converged"] = false;
    out["error"] = e.what();
    fs::create_directories(rc.output_dir);
    write_json(rc.output_dir / "rate_result.json", out);
    std::cerr << "mvsde: " << e.what() << "\n";
    return kFailed;
  }
  fs::create_directories(rc.output_dir);
  const auto control_path = rc.output_dir / "control.csv";
  write_control_csv(control_path.string(), res.control);
  out["I_value"] = res.converged ? json(res.value) : json("inf");
  out["half_energy"] = res.value;
  out["method"] = res.method;
  out["residual"] = res.residual;
  out["iterations"] = res.iterations;
  out["converged"] = res.converged;
  out["kind"] = to_string(r.kind);
  out["control_csv_path"] = control_path.string();
  write_json(rc.output_dir / "rate_result.json", out);
  std::printf("I = %.10g (%s, residual %.3g, %s)\n", res.value, res.method.c_str(), res.residual,
              res.converged ? "converged" : "not converged");
  return res.converged ? kOk : kFailed;
}

int cmd_experiment(const RunConfig& rc, const std::string& kind) {
  const auto& e = rc.experiment;
  ExperimentReport report;
  if (kind == "lln")
    report = lln_experiment(rc.sim, e.eps_grid, e.settings);
  else if (kind == "mdp")
    report = mdp_experiment(rc.sim, e.eps_grid, e.settings);
  else if (kind == "clt")
    report = clt_scaling_experiment(rc.sim, e.eps_grid, e.settings);
  else {
    const auto base = e.base_control ? e.base_control->build(rc.sim.grid, rc.sim.noise_dim())
                                     : Control::zero(rc.sim.grid.n_steps, rc.sim.noise_dim(), rc.sim.grid.h);
    report = skeleton_continuity_check(rc.sim, base, e.continuity);
  }
  fs::create_directories(rc.output_dir);
  write_json(rc.output_dir / "report.json", report.to_json());
  std::ofstream csv(rc.output_dir / "report.csv");
  report.write_csv(csv);
  for (const auto& c : report.checks)
    std::printf("%s %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  std::printf("%s %s\n", kind.c_str(), report.passed ? "passed" : "failed");
  return report.passed ? kOk : kFailed;
}

std::optional<std::size_t> env_threads() {
  const char* v = std::getenv("MVSDE_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const auto n = std::strtoull(v, &end, 10);
  if (*end != '\0' || n == 0) return std::nullopt;
  return static_cast<std::size_t>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and asymptotics toolkit for path-dependent multivalued McKean-Vlasov SDEs"};
  app.set_version_flag("--version", MVSDE_VERSION);
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  std::string kind;
  std::string system;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "YAML config, or a manifest.json to replay")->required();
    sub->add_option("--seed", seed, "Override execution.seed");
    sub->add_option("--threads", threads, "Thread budget (default: MVSDE_THREADS or config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output directory");
  };
  auto* sim = app.add_subcommand("simulate", "Simulate a particle system or deterministic path");
  common(sim);
  sim->add_option("--system", system, "Override simulate.system")
      ->check(CLI::IsMember({"perturbed", "controlled", "limit", "skeleton", "mdp", "mdp_skeleton", "clt"}));
  auto* skel = app.add_subcommand("skeleton", "Solve the skeleton equation for simulate.control");
  common(skel);
  auto* rate = app.add_subcommand("rate", "Evaluate the rate function at a target path");
  common(rate);
  auto* exp = app.add_subcommand("experiment", "Run a convergence experiment");
  common(exp);
  exp->add_option("--kind", kind, "Experiment kind")->required()->check(CLI::IsMember({"lln", "mdp", "clt", "skeleton"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  CliOverrides ov;
  ov.seed = seed;
  ov.threads = threads ? threads : env_threads();
  if (out) ov.out = fs::path(*out);

  RunConfig rc;
  try {
    rc = load(config, ov);
    if (threads) rc.experiment.settings.threads = *threads;
  } catch (const ConfigError& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return kConfig;
  }

  try {
    if (sim->parsed()) {
      write_manifest(rc, "simulate");
      return cmd_simulate(rc, system.empty() ? rc.simulate.system : system);
    }
    if (skel->parsed()) {
      write_manifest(rc, "skeleton");
      return cmd_simulate(rc, "skeleton");
    }
    if (rate->parsed()) {
      write_manifest(rc, "rate");
      return cmd_rate(rc);
    }
    write_manifest(rc, "experiment " + kind);
    return cmd_experiment(rc, kind);
  } catch (const ConfigError& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return kConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "mvsde: precondition failed: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "mvsde: " << e.what() << "\n";
    return kFailed;
  }
}
