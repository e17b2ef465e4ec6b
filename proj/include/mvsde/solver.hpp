#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/monotone_ops.hpp"
#include "mvsde/path_space.hpp"

namespace mvsde {

/// Piecewise-constant control u on [0, T]: one value in R^m per grid step.
class Control {
 public:
  Control() = default;
  /// Throws std::invalid_argument if `budget` is given and h sum |u_k|^2 exceeds it.
  Control(std::size_t n_steps, std::size_t m, double h, Vec values, std::optional<double> budget = std::nullopt);

  static Control zero(std::size_t n_steps, std::size_t m, double h) { return Control(n_steps, m, h, Vec(n_steps * m, 0.0)); }
  static Control constant(std::size_t n_steps, double h, const Vec& value);

  std::size_t steps() const { return n_steps_; }
  std::size_t dim() const { return m_; }
  double h() const { return h_; }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  std::span<const double> at(std::size_t k) const { return {values_.data() + k * m_, m_}; }

  /// h sum_k |u_k|^2
  double energy() const;

 private:
  std::size_t n_steps_ = 0;
  std::size_t m_ = 0;
  double h_ = 0.0;
  Vec values_;
};

struct SimConfig {
  TimeGrid grid;
  std::size_t particles = 1;
  double epsilon = 0.0;
  /// MDP normalization a(eps); eps^a_gamma when unset.
  std::optional<double> a_eps;
  double a_gamma = 0.25;
  std::uint64_t seed = 0;
  OperatorPtr op;
  CoefficientsPtr coefficients;
  /// Initial segment node values on [-r0, 0], node-major, already in the closure of D(A).
  Vec xi;
  /// Controlled runs: drive the uncontrolled companion with the same noise.
  bool share_companion_noise = true;

  std::size_t dim() const { return op->dimension(); }
  std::size_t noise_dim() const { return coefficients->noise_dim(); }
  double mdp_scale() const;
  /// Throws std::invalid_argument on inconsistent dimensions or sizes.
  void validate() const;
};

struct SolutionBundle {
  std::vector<Trajectory> particles;
  std::vector<Trajectory> k_processes;  // K(t) = 0 for t <= 0
  Vec k_variation;                      // sum over steps of |dK|
  /// Brownian increments, index ((particle * n_steps) + step) * m + j.
  Vec noise;
  std::size_t noise_dim = 0;

  std::size_t size() const { return particles.size(); }
  std::span<const double> increment(std::size_t particle, std::size_t step) const;
};

/// A single deterministic path with its reflection term.
struct ReflectedPath {
  Trajectory x;
  Trajectory k;
  double k_variation = 0.0;
};

/// dX in -A(X)dt + b(X_t, L_{X_t})dt + sqrt(eps) sigma(X_t, L_{X_t})dW,
/// with the law replaced by the empirical measure of the P particles.
SolutionBundle simulate_perturbed(const SimConfig& cfg);

/// Controlled system; the measure argument is the law of the uncontrolled
/// companion, which is simulated alongside and returned as `second`.
std::pair<SolutionBundle, SolutionBundle> simulate_controlled_with_companion(const SimConfig& cfg, const Control& u);
SolutionBundle simulate_controlled(const SimConfig& cfg, const Control& u);

/// dX0 in -A(X0)dt + b(X0_t, delta_{X0_t})dt.
ReflectedPath solve_deterministic_limit(const SimConfig& cfg);

/// dX in -A(X)dt + b(X_t, delta_{X0_t})dt + sigma(X_t, delta_{X0_t}) u dt, from xi.
ReflectedPath solve_skeleton(const SimConfig& cfg, const Control& u, const Trajectory& x0);

/// Normalized deviation M = (X~ - X0) / a(eps), simulated directly with the
/// resolvent applied to M. With a control, the law argument comes from the
/// uncontrolled companion (returned as `second`).
SolutionBundle simulate_mdp_deviation(const SimConfig& cfg, const Trajectory& x0);
std::pair<SolutionBundle, SolutionBundle> simulate_mdp_deviation(const SimConfig& cfg, const Trajectory& x0,
                                                                 const Control& u);

/// dM in -A(M)dt + <Db(X0_t, delta), M_t>dt + sigma(X0_t, delta) u dt, M = 0 on [-r0, 0].
ReflectedPath solve_mdp_skeleton(const SimConfig& cfg, const Control& u, const Trajectory& x0);

/// Coupled pair (Z^eps, Z) driven by identical Brownian increments.
std::pair<SolutionBundle, SolutionBundle> simulate_clt_pair(const SimConfig& cfg, const Trajectory& x0);

}  // namespace mvsde
