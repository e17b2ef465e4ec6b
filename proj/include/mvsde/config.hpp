#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvsde/errors.hpp"
#include "mvsde/experiments.hpp"
#include "mvsde/rate_function.hpp"

namespace mvsde {

/// Schema violation; `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line) : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Constant value per coordinate, or a CSV with header `t,u1..um`, one row per step.
struct ControlSpec {
  std::optional<Vec> constant;
  std::filesystem::path csv;

  Control build(const TimeGrid& grid, std::size_t m) const;
};

struct SimulateTask {
  std::string system = "perturbed";  // perturbed|controlled|limit|skeleton|mdp|mdp_skeleton|clt
  std::optional<ControlSpec> control;
};

struct RateTask {
  SkeletonKind kind = SkeletonKind::ldp;
  std::string target = "limit";  // limit|ramp|csv|skeleton
  double slope = 1.0;
  std::filesystem::path target_csv;
  std::optional<ControlSpec> target_control;
  std::string method = "auto";  // auto|inversion|penalty
  std::optional<double> budget;
  double tolerance = 1e-4;
  OptimizerSettings optimizer;
};

struct ExperimentTask {
  std::vector<double> eps_grid{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  ExperimentSettings settings;
  std::optional<ControlSpec> control;       // mdp
  std::optional<ControlSpec> base_control;  // skeleton
  ContinuitySettings continuity;
};

struct RunConfig {
  std::filesystem::path source;
  std::string text;
  nlohmann::json document;  // merged config echo
  std::string preset;
  SimConfig sim;
  std::filesystem::path output_dir;
  SimulateTask simulate;
  RateTask rate;
  ExperimentTask experiment;
  std::uint64_t config_hash = 0;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::filesystem::path> out;
};

/// Parses and validates a YAML run configuration. Relative paths resolve
/// against the config file's directory. Throws ConfigError.
RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& overrides = {});
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const CliOverrides& overrides = {});

std::vector<std::string> preset_names();
/// Problem block of a shipped preset.
nlohmann::json preset_problem(const std::string& name);
/// Ready-to-run configuration of a preset.
SimConfig preset_config(const std::string& name);

/// The preset's control for the controlled fourth-moment study.
Control preset_mdp_control(const std::string& name, const TimeGrid& grid);

/// Target path of the rate task (limit, ramp, csv or skeleton of a control).
Trajectory build_rate_target(const RunConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);

/// Control CSV with header `t,u1..um`.
void write_control_csv(const std::string& path, const Control& u);
Control read_control_csv(const std::string& path, const TimeGrid& grid, std::size_t m);

}  // namespace mvsde
