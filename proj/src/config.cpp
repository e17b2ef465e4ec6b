#include "mvsde/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace mvsde {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(where + " must be a mapping", line_of(n));
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("unknown key '" + key + "' in " + where + " (allowed: " + list + ")", line_of(kv.first));
    }
  }
}

double number(const YAML::Node& n, const std::string& where) {
  if (!n.IsScalar()) throw ConfigError(where + " must be a number", line_of(n));
  const auto text = n.Scalar();
  if (text == "inf" || text == "+inf" || text == ".inf") return kInf;
  if (text == "-inf" || text == "-.inf") return -kInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + " must be a number, got '" + text + "'", line_of(n));
}

std::uint64_t unsigned_integer(const YAML::Node& n, const std::string& where) {
  if (n.IsScalar()) {
    try {
      std::size_t used = 0;
      const auto text = n.Scalar();
      if (!text.empty() && text[0] != '-') {
        const auto v = std::stoull(text, &used, 0);
        if (used == text.size()) return v;
      }
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(where + " must be a nonnegative integer", line_of(n));
}

bool boolean(const YAML::Node& n, const std::string& where) {
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + " must be true or false", line_of(n));
  }
}

std::string text(const YAML::Node& n, const std::string& where) {
  if (!n.IsScalar()) throw ConfigError(where + " must be a string", line_of(n));
  return n.Scalar();
}

Vec numbers(const YAML::Node& n, const std::string& where) {
  Vec out;
  if (n.IsScalar()) {
    out.push_back(number(n, where));
    return out;
  }
  if (!n.IsSequence()) throw ConfigError(where + " must be a number or a list of numbers", line_of(n));
  for (const auto& x : n) out.push_back(number(x, where));
  return out;
}

nlohmann::json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      auto arr = nlohmann::json::array();
      for (const auto& x : n) arr.push_back(to_json(x));
      return arr;
    }
    case YAML::NodeType::Map: {
      auto obj = nlohmann::json::object();
      for (const auto& kv : n) obj[kv.first.as<std::string>()] = to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar:
      break;
  }
  const auto& s = n.Scalar();
  if (n.Tag() == "!") return s;
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (s == "~" || s == "null") return nullptr;
  if (s == ".inf" || s == "+.inf" || s == "inf" || s == "+inf") return "inf";
  if (s == "-.inf" || s == "-inf") return "-inf";
  try {
    std::size_t used = 0;
    const long long i = std::stoll(s, &used);
    if (used == s.size()) return i;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::exception&) {
  }
  return s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

ControlSpec parse_control(const YAML::Node& n, const fs::path& base, const std::string& where) {
  check_keys(n, {"constant", "csv"}, where);
  ControlSpec c;
  if (n["constant"] && n["csv"]) throw ConfigError(where + ": give either constant or csv", line_of(n));
  if (n["constant"]) {
    c.constant = numbers(n["constant"], where + ".constant");
  } else if (n["csv"]) {
    c.csv = resolve(base, text(n["csv"], where + ".csv"));
  } else {
    throw ConfigError("missing required key 'constant' or 'csv' in " + where, line_of(n));
  }
  return c;
}

std::vector<double> positive_list(const YAML::Node& n, const std::string& where) {
  auto v = numbers(n, where);
  if (v.empty()) throw ConfigError(where + " must not be empty", line_of(n));
  return v;
}

/// Preset problem blocks as YAML text, so merged documents share one parser.
const char* preset_text(const std::string& name) {
  if (name == "reflected_bm")
    return R"(
dimension: 1
operator: {kind: box, lower: [0], upper: [inf]}
coefficients:
  kind: example5
  f: {s: identity, c0: 0, C1: 0, C2: 0, C3: 0}
  g: {s: identity, c0: 1, C1: 0, C2: 0, C3: 0}
  phi: {alpha: 0, beta: 0}
initial_segment: {constant: 0}
grid: {h: 0.001, r0: 0, T: 1}
epsilon: 1
)";
  if (name == "delay_linear")
    return R"(
dimension: 1
operator: {kind: zero}
coefficients:
  kind: example5
  f: {s: identity, c0: 0, C1: 0, C2: -1, C3: 0}
  g: {s: identity, c0: 1, C1: 0, C2: 0, C3: 0}
  phi: {alpha: 0, beta: 0}
initial_segment: {constant: 1}
grid: {h: 0.01, r0: 1, T: 2}
epsilon: 0
)";
  if (name == "example5_tanh_reflected")
    return R"(
dimension: 1
operator: {kind: box, lower: [0], upper: [inf]}
coefficients:
  kind: example5
  f: {s: tanh, c0: 0.5, C1: -1, C2: 0.5, C3: 0.3}
  g: {s: tanh, c0: 0.3, C1: 0.2, C2: 0, C3: 0}
  phi: {alpha: 0.5, beta: 0}
initial_segment: {constant: 1}
grid: {h: 0.01, r0: 1, T: 1}
epsilon: 0.01
)";
  return nullptr;
}

YAML::Node preset_node(const std::string& name, int line) {
  const char* t = preset_text(name);
  if (!t) {
    std::string list;
    for (const auto& p : preset_names()) list += (list.empty() ? "" : ", ") + p;
    throw ConfigError("unknown preset '" + name + "' (available: " + list + ")", line);
  }
  return YAML::Load(t);
}

void parse_problem(const YAML::Node& user, const fs::path& base, RunConfig& rc) {
  check_keys(user, {"preset", "dimension", "operator", "coefficients", "initial_segment", "grid", "epsilon", "a_eps"},
             "problem");
  YAML::Node merged = YAML::Node(YAML::NodeType::Map);
  if (user["preset"]) {
    rc.preset = text(user["preset"], "problem.preset");
    const auto p = preset_node(rc.preset, line_of(user["preset"]));
    for (const auto& kv : p) merged[kv.first.as<std::string>()] = kv.second;
  }
  for (const auto& kv : user) merged[kv.first.as<std::string>()] = kv.second;
  for (const char* key : {"operator", "coefficients", "initial_segment", "grid"})
    if (!merged[key]) throw ConfigError(std::string("missing required key 'problem.") + key + "'", line_of(user));

  std::size_t d = 1;
  if (merged["dimension"]) {
    d = unsigned_integer(merged["dimension"], "problem.dimension");
    if (d == 0) throw ConfigError("problem.dimension must be positive", line_of(merged["dimension"]));
  }

  const auto& g = merged["grid"];
  check_keys(g, {"h", "r0", "T"}, "problem.grid");
  for (const char* key : {"h", "T"})
    if (!g[key]) throw ConfigError(std::string("missing required key 'problem.grid.") + key + "'", line_of(g));
  try {
    rc.sim.grid = TimeGrid::from_horizon(number(g["h"], "problem.grid.h"), g["r0"] ? number(g["r0"], "problem.grid.r0") : 0.0,
                                         number(g["T"], "problem.grid.T"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem.grid: ") + e.what(), line_of(g));
  }

  try {
    rc.sim.op = operator_from_json(to_json(merged["operator"]), d);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem.operator: ") + e.what(), line_of(merged["operator"]));
  }
  try {
    rc.sim.coefficients = coefficients_from_json(to_json(merged["coefficients"]), d);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem.coefficients: ") + e.what(), line_of(merged["coefficients"]));
  }

  const auto& xi = merged["initial_segment"];
  check_keys(xi, {"constant", "values", "csv"}, "problem.initial_segment");
  const std::size_t nodes = rc.sim.grid.segment_nodes();
  Vec values;
  if (xi["constant"]) {
    const auto c = numbers(xi["constant"], "problem.initial_segment.constant");
    if (c.size() != 1 && c.size() != d)
      throw ConfigError("problem.initial_segment.constant needs 1 or " + std::to_string(d) + " values", line_of(xi));
    for (std::size_t j = 0; j < nodes; ++j)
      for (std::size_t k = 0; k < d; ++k) values.push_back(c.size() == 1 ? c[0] : c[k]);
  } else if (xi["values"]) {
    for (const auto& row : xi["values"]) {
      const auto v = numbers(row, "problem.initial_segment.values");
      values.insert(values.end(), v.begin(), v.end());
    }
    if (values.size() != nodes * d)
      throw ConfigError("problem.initial_segment.values needs " + std::to_string(nodes) + " nodes of dimension " +
                            std::to_string(d),
                        line_of(xi["values"]));
  } else if (xi["csv"]) {
    const auto path = resolve(base, text(xi["csv"], "problem.initial_segment.csv"));
    try {
      const auto t = read_trajectory_csv(path.string());
      if (t.dim() != d || t.grid().n_nodes() != nodes)
        throw std::runtime_error("expected " + std::to_string(nodes) + " rows of dimension " + std::to_string(d));
      values = t.values();
    } catch (const std::exception& e) {
      throw ConfigError("problem.initial_segment.csv (" + path.string() + "): " + e.what(), line_of(xi["csv"]));
    }
  } else {
    throw ConfigError("missing required key 'constant', 'values' or 'csv' in problem.initial_segment", line_of(xi));
  }
  const auto projected = project_initial_segment(*rc.sim.op, values);
  if (projected.max_shift > 1e-12)
    throw ConfigError("problem.initial_segment leaves the closure of D(A) (distance " +
                          std::to_string(projected.max_shift) + ")",
                      line_of(xi));
  rc.sim.xi = projected.values;

  if (merged["epsilon"]) {
    rc.sim.epsilon = number(merged["epsilon"], "problem.epsilon");
    if (!(rc.sim.epsilon >= 0.0)) throw ConfigError("problem.epsilon must be nonnegative", line_of(merged["epsilon"]));
  }
  if (merged["a_eps"]) {
    const auto& a = merged["a_eps"];
    check_keys(a, {"gamma", "value"}, "problem.a_eps");
    if (a["gamma"]) {
      rc.sim.a_gamma = number(a["gamma"], "problem.a_eps.gamma");
      if (!(rc.sim.a_gamma > 0.0 && rc.sim.a_gamma < 0.5))
        throw ConfigError("problem.a_eps.gamma must lie in (0, 1/2)", line_of(a["gamma"]));
    }
    if (a["value"]) rc.sim.a_eps = number(a["value"], "problem.a_eps.value");
  }
  rc.document["problem"] = to_json(merged);
}

void parse_execution(const YAML::Node& n, RunConfig& rc) {
  check_keys(n, {"particles", "replicas_per_batch", "batches", "seed", "threads", "share_companion_noise"}, "execution");
  if (n["particles"]) rc.sim.particles = unsigned_integer(n["particles"], "execution.particles");
  if (rc.sim.particles == 0) throw ConfigError("execution.particles must be positive", line_of(n["particles"]));
  auto& s = rc.experiment.settings;
  if (n["replicas_per_batch"]) s.replicas_per_batch = unsigned_integer(n["replicas_per_batch"], "execution.replicas_per_batch");
  if (n["batches"]) s.batches = unsigned_integer(n["batches"], "execution.batches");
  if (s.batches < 8) throw ConfigError("execution.batches must be at least 8", line_of(n["batches"]));
  if (s.replicas_per_batch == 0) throw ConfigError("execution.replicas_per_batch must be positive", line_of(n["replicas_per_batch"]));
  if (n["seed"]) rc.sim.seed = unsigned_integer(n["seed"], "execution.seed");
  if (n["threads"]) s.threads = unsigned_integer(n["threads"], "execution.threads");
  if (n["share_companion_noise"]) rc.sim.share_companion_noise = boolean(n["share_companion_noise"], "execution.share_companion_noise");
}

void parse_simulate(const YAML::Node& n, const fs::path& base, RunConfig& rc) {
  check_keys(n, {"system", "control"}, "simulate");
  if (n["system"]) {
    rc.simulate.system = text(n["system"], "simulate.system");
    static const std::set<std::string> systems{"perturbed", "controlled", "limit", "skeleton", "mdp", "mdp_skeleton", "clt"};
    if (!systems.count(rc.simulate.system))
      throw ConfigError("simulate.system must be one of perturbed, controlled, limit, skeleton, mdp, mdp_skeleton, clt",
                        line_of(n["system"]));
  }
  if (n["control"]) rc.simulate.control = parse_control(n["control"], base, "simulate.control");
}

void parse_rate(const YAML::Node& n, const fs::path& base, RunConfig& rc) {
  check_keys(n, {"kind", "target", "method", "budget", "tolerance", "penalties", "max_iterations", "fd_step", "memory",
                 "warm_start"},
             "rate");
  auto& r = rc.rate;
  if (n["kind"]) {
    try {
      r.kind = skeleton_kind_from_string(text(n["kind"], "rate.kind"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("rate.kind: ") + e.what(), line_of(n["kind"]));
    }
  }
  if (n["target"]) {
    const auto& t = n["target"];
    if (t.IsScalar()) {
      if (t.Scalar() != "limit") throw ConfigError("rate.target must be 'limit' or a mapping", line_of(t));
      r.target = "limit";
    } else {
      check_keys(t, {"ramp", "csv", "skeleton"}, "rate.target");
      if (t.size() != 1) throw ConfigError("rate.target needs exactly one of ramp, csv, skeleton", line_of(t));
      if (t["ramp"]) {
        r.target = "ramp";
        r.slope = number(t["ramp"], "rate.target.ramp");
      } else if (t["csv"]) {
        r.target = "csv";
        r.target_csv = resolve(base, text(t["csv"], "rate.target.csv"));
      } else {
        r.target = "skeleton";
        r.target_control = parse_control(t["skeleton"], base, "rate.target.skeleton");
      }
    }
  }
  if (n["method"]) {
    r.method = text(n["method"], "rate.method");
    if (r.method != "auto" && r.method != "inversion" && r.method != "penalty")
      throw ConfigError("rate.method must be auto, inversion or penalty", line_of(n["method"]));
  }
  if (n["budget"]) r.budget = number(n["budget"], "rate.budget");
  if (n["tolerance"]) r.tolerance = number(n["tolerance"], "rate.tolerance");
  if (n["penalties"]) r.optimizer.penalties = positive_list(n["penalties"], "rate.penalties");
  if (n["max_iterations"]) r.optimizer.max_iterations = unsigned_integer(n["max_iterations"], "rate.max_iterations");
  if (n["fd_step"]) r.optimizer.fd_step = number(n["fd_step"], "rate.fd_step");
  if (n["memory"]) r.optimizer.memory = unsigned_integer(n["memory"], "rate.memory");
  if (n["warm_start"]) r.optimizer.warm_start = boolean(n["warm_start"], "rate.warm_start");
}

void parse_experiment(const YAML::Node& n, const fs::path& base, RunConfig& rc) {
  check_keys(n, {"epsilon_grid", "threshold", "expected_exponent", "moment_p", "control", "base_control", "amplitudes",
                 "frequency", "frequencies", "frequency_amplitude", "tolerance"},
             "experiment");
  auto& e = rc.experiment;
  if (n["epsilon_grid"]) {
    e.eps_grid = positive_list(n["epsilon_grid"], "experiment.epsilon_grid");
    for (std::size_t i = 0; i < e.eps_grid.size(); ++i) {
      if (!(e.eps_grid[i] > 0.0)) throw ConfigError("experiment.epsilon_grid values must be positive", line_of(n["epsilon_grid"]));
      if (i > 0 && !(e.eps_grid[i] < e.eps_grid[i - 1]))
        throw ConfigError("experiment.epsilon_grid must be strictly decreasing", line_of(n["epsilon_grid"]));
    }
  }
  if (n["threshold"]) e.settings.threshold = number(n["threshold"], "experiment.threshold");
  if (n["expected_exponent"]) e.settings.expected_exponent = number(n["expected_exponent"], "experiment.expected_exponent");
  if (n["moment_p"]) {
    e.settings.moment_p = static_cast<int>(unsigned_integer(n["moment_p"], "experiment.moment_p"));
    if (e.settings.moment_p < 1) throw ConfigError("experiment.moment_p must be at least 1", line_of(n["moment_p"]));
  }
  if (n["control"]) e.control = parse_control(n["control"], base, "experiment.control");
  if (n["base_control"]) e.base_control = parse_control(n["base_control"], base, "experiment.base_control");
  if (n["amplitudes"]) e.continuity.amplitudes = positive_list(n["amplitudes"], "experiment.amplitudes");
  if (n["frequency"]) e.continuity.frequency = number(n["frequency"], "experiment.frequency");
  if (n["frequencies"]) e.continuity.frequencies = positive_list(n["frequencies"], "experiment.frequencies");
  if (n["frequency_amplitude"]) e.continuity.frequency_amplitude = number(n["frequency_amplitude"], "experiment.frequency_amplitude");
  if (n["tolerance"]) e.continuity.tolerance = number(n["tolerance"], "experiment.tolerance");
}

}  // namespace

Control ControlSpec::build(const TimeGrid& grid, std::size_t m) const {
  if (constant) {
    if (constant->size() != 1 && constant->size() != m)
      throw ConfigError("control constant needs 1 or " + std::to_string(m) + " values", 0);
    return Control::constant(grid.n_steps, grid.h, constant->size() == 1 ? Vec(m, (*constant)[0]) : *constant);
  }
  return read_control_csv(csv.string(), grid, m);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> preset_names() { return {"reflected_bm", "delay_linear", "example5_tanh_reflected"}; }

nlohmann::json preset_problem(const std::string& name) { return to_json(preset_node(name, 0)); }

SimConfig preset_config(const std::string& name) {
  preset_node(name, 0);
  return parse_run_config("problem: {preset: " + name + "}\n", fs::current_path()).sim;
}

Control preset_mdp_control(const std::string& name, const TimeGrid& grid) {
  preset_node(name, 0);
  return Control::constant(grid.n_steps, grid.h, {name == "example5_tanh_reflected" ? 2.0 : 1.0});
}

RunConfig parse_run_config(const std::string& yaml_text, const fs::path& base_dir, const CliOverrides& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("YAML syntax error: " + e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping with a 'problem' block", line_of(root));
  check_keys(root, {"problem", "execution", "simulate", "rate", "experiment", "output"}, "config");
  if (!root["problem"]) throw ConfigError("missing required key 'problem'", 1);

  RunConfig rc;
  rc.text = yaml_text;
  rc.config_hash = fnv1a64(yaml_text);
  rc.sim.seed = 1;
  rc.sim.particles = 100;
  parse_problem(root["problem"], base_dir, rc);
  if (root["execution"]) parse_execution(root["execution"], rc);
  if (root["simulate"]) parse_simulate(root["simulate"], base_dir, rc);
  if (root["rate"]) parse_rate(root["rate"], base_dir, rc);
  if (root["experiment"]) parse_experiment(root["experiment"], base_dir, rc);
  rc.output_dir = base_dir / "out";
  if (root["output"]) {
    check_keys(root["output"], {"directory"}, "output");
    if (root["output"]["directory"]) rc.output_dir = resolve(base_dir, text(root["output"]["directory"], "output.directory"));
  }
  if (overrides.seed) rc.sim.seed = *overrides.seed;
  if (overrides.threads) rc.experiment.settings.threads = *overrides.threads;
  if (overrides.out) rc.output_dir = *overrides.out;
  if (rc.experiment.settings.threads == 0) rc.experiment.settings.threads = 1;
  if (!rc.experiment.control && !rc.preset.empty())
    rc.experiment.settings.control = preset_mdp_control(rc.preset, rc.sim.grid);
  if (rc.experiment.control) rc.experiment.settings.control = rc.experiment.control->build(rc.sim.grid, rc.sim.noise_dim());

  for (const char* block : {"execution", "simulate", "rate", "experiment", "output"})
    if (root[block]) rc.document[block] = to_json(root[block]);
  rc.document["execution"]["seed"] = rc.sim.seed;
  rc.document["execution"]["threads"] = rc.experiment.settings.threads;
  try {
    rc.sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), line_of(root["problem"]));
  }
  return rc;
}

RunConfig load_run_config(const fs::path& path, const CliOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = path.has_parent_path() ? path.parent_path() : fs::current_path();
  auto rc = parse_run_config(ss.str(), base, overrides);
  rc.source = path;
  return rc;
}

Trajectory build_rate_target(const RunConfig& cfg) {
  const auto& sim = cfg.sim;
  const auto& r = cfg.rate;
  const std::size_t d = sim.dim();
  const bool ldp = r.kind == SkeletonKind::ldp;
  if (r.target == "limit") {
    if (ldp) return solve_deterministic_limit(sim).x;
    return Trajectory(sim.grid, d);
  }
  if (r.target == "ramp") {
    Trajectory g(sim.grid, d);
    const std::size_t present = sim.grid.index_of_step(0);
    for (std::size_t idx = 0; idx < sim.grid.n_nodes(); ++idx)
      for (std::size_t c = 0; c < d; ++c) {
        const double t = sim.grid.time_of_index(idx);
        const double start = ldp ? sim.xi[(idx < present ? idx : present) * d + c] : 0.0;
        g.node(idx)[c] = t <= 0.0 ? (ldp ? sim.xi[idx * d + c] : 0.0) : start + r.slope * t;
      }
    return g;
  }
  if (r.target == "skeleton") {
    const auto u = r.target_control->build(sim.grid, sim.noise_dim());
    const auto x0 = solve_deterministic_limit(sim).x;
    return ldp ? solve_skeleton(sim, u, x0).x : solve_mdp_skeleton(sim, u, x0).x;
  }
  Trajectory t;
  try {
    t = read_trajectory_csv(r.target_csv.string());
  } catch (const std::exception& e) {
    throw ConfigError("rate.target.csv (" + r.target_csv.string() + "): " + e.what(), 0);
  }
  const auto& g = t.grid();
  if (t.dim() != d || g.n_history != sim.grid.n_history || g.n_steps != sim.grid.n_steps ||
      std::abs(g.h - sim.grid.h) > 1e-9 * sim.grid.h)
    throw ConfigError("rate.target.csv does not match the problem grid", 0);
  return Trajectory(sim.grid, d, t.values());
}

void write_control_csv(const std::string& path, const Control& u) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t";
  for (std::size_t j = 0; j < u.dim(); ++j) out << ",u" << j + 1;
  out << "\n";
  char buf[64];
  for (std::size_t k = 0; k < u.steps(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", u.h() * static_cast<double>(k));
    out << buf;
    for (double v : u.at(k)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

Control read_control_csv(const std::string& path, const TimeGrid& grid, std::size_t m) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read control file " + path, 0);
  std::string line;
  std::getline(in, line);
  Vec values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != m) throw ConfigError(path + ": row " + std::to_string(rows + 1) + " needs " + std::to_string(m) + " values", 0);
    ++rows;
  }
  if (rows != grid.n_steps)
    throw ConfigError(path + ": expected " + std::to_string(grid.n_steps) + " rows, got " + std::to_string(rows), 0);
  return Control(grid.n_steps, m, grid.h, std::move(values));
}

}  // namespace mvsde
