#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvsde/solver.hpp"

namespace mvsde {

struct EpsilonStats {
  double epsilon = 0.0;
  double mean = 0.0;
  double se = 0.0;  // sd of batch means / sqrt(batches)
  std::vector<double> batch_means;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;
  std::vector<std::string> warnings;
};

struct ReportCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct NamedStatistic {
  std::string name;
  std::vector<EpsilonStats> levels;
};

struct ExperimentReport {
  std::string kind;
  std::vector<double> epsilon_grid;
  std::vector<NamedStatistic> statistics;
  std::optional<SlopeFit> slope;
  bool exact_match = false;
  std::vector<ReportCheck> checks;
  bool passed = false;
  double runtime_seconds = 0.0;
  std::size_t threads = 1;
  std::size_t replicas = 0;
  std::size_t batches = 0;

  const NamedStatistic& statistic(const std::string& name) const;
  nlohmann::json to_json() const;
  /// Columns epsilon,batch,statistic,value; one row per batch mean.
  void write_csv(std::ostream& os) const;
};

struct ExperimentSettings {
  std::size_t batches = 8;
  std::size_t replicas_per_batch = 4;
  std::size_t threads = 1;
  double threshold = 1e-2;
  /// When set, consecutive levels must scale as (eps ratio)^exponent within 3 SE.
  std::optional<double> expected_exponent;
  /// Moment order 2p for the central limit study.
  int moment_p = 1;
  /// Control for the bounded fourth moment of the controlled deviation; u = 1 when unset.
  std::optional<Control> control;
};

/// E sup |X^eps - X0|^2 along a strictly decreasing eps grid.
ExperimentReport lln_experiment(const SimConfig& cfg, const std::vector<double>& eps_grid, const ExperimentSettings& s);

/// E sup |M^eps|^2 (uncontrolled) and E sup |M^{eps,u}|^4 (controlled) per eps.
ExperimentReport mdp_experiment(const SimConfig& cfg, const std::vector<double>& eps_grid, const ExperimentSettings& s);

/// E sup |Z^eps - Z|^{2p} per eps with a log-log slope fit.
ExperimentReport clt_scaling_experiment(const SimConfig& cfg, const std::vector<double>& eps_grid,
                                        const ExperimentSettings& s);

struct ContinuitySettings {
  std::vector<double> amplitudes{1e-1, 1e-3, 1e-5, 1e-7};
  double frequency = 5.0;
  /// Weak-convergence variant: fixed amplitude, growing frequency.
  std::vector<double> frequencies;
  double frequency_amplitude = 0.5;
  double tolerance = 1e-6;
};

/// sup distance between X^{0,h + a sin(k t)} and X^{0,h} as a -> 0 (and k -> inf).
ExperimentReport skeleton_continuity_check(const SimConfig& cfg, const Control& h, const ContinuitySettings& s);

/// OLS of log value on log eps. `batches[i]` are the batch means behind
/// values[i]; when present the CI is a bootstrap over batches, otherwise a
/// normal interval from the OLS standard error. Throws FitUnavailable.
SlopeFit fit_loglog_slope(const std::vector<double>& eps, const std::vector<double>& values,
                          const std::vector<std::vector<double>>& batches = {});

/// Mean and standard error from batch means.
EpsilonStats summarize(double epsilon, std::vector<double> batch_means);

}  // namespace mvsde
