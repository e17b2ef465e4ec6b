#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "mvsde/measures.hpp"

namespace mvsde {

/// Coefficients with the measure argument frozen. Binding once per time
/// step lets a family precompute its law-dependent part (for a mean-field
/// family this turns the P-particle update from O(P^2) into O(P)).
class BoundCoefficients {
 public:
  virtual ~BoundCoefficients() = default;
  /// b(zeta, mu), length d.
  virtual void drift(const Segment& zeta, std::span<double> out) const = 0;
  /// sigma(zeta, mu), d x m row-major.
  virtual void diffusion(const Segment& zeta, std::span<double> out) const = 0;
};

/// The pair (b, sigma) on C x P_2(C), with optional closed-form derivative
/// providers. Implementations are immutable and deterministic.
class CoefficientSet {
 public:
  virtual ~CoefficientSet() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t noise_dim() const = 0;

  virtual std::unique_ptr<BoundCoefficients> bind(const EmpiricalMeasure& mu) const = 0;

  /// <Db(zeta, mu), v>. Returns false when no closed form exists.
  virtual bool frechet_closed_form(const Segment&, const EmpiricalMeasure&, const Segment&, std::span<double>) const {
    return false;
  }

  /// E[<D^L b(zeta, mu)(X), dir(X)>] at the empirical measure of `atoms`,
  /// with dirs[i] the direction attached to atoms[i]. Returns false when no
  /// closed form exists.
  virtual bool lions_closed_form(const Segment&, const EmpiricalMeasure&, std::span<const Segment>,
                                 std::span<double>) const {
    return false;
  }

  virtual nlohmann::json describe() const { return {{"kind", "custom"}}; }
};

using CoefficientsPtr = std::shared_ptr<const CoefficientSet>;

/// Coefficients given by plain callables; no derivative providers. The
/// bound object keeps a copy of the measure's atom views.
class CallableCoefficients final : public CoefficientSet {
 public:
  using Field = std::function<void(const Segment&, const EmpiricalMeasure&, std::span<double>)>;

  CallableCoefficients(std::size_t d, std::size_t m, Field b, Field sigma);

  std::size_t state_dim() const override { return d_; }
  std::size_t noise_dim() const override { return m_; }
  std::unique_ptr<BoundCoefficients> bind(const EmpiricalMeasure& mu) const override;

 private:
  std::size_t d_, m_;
  Field b_, sigma_;
};

enum class Nonlinearity { identity, tanh };

Nonlinearity nonlinearity_from_string(const std::string& s);
std::string to_string(Nonlinearity s);

/// s(c0 + C1 eta(0) + C2 eta(-r0) + C3 (1/r0) int eta), applied per coordinate.
struct SegmentFunctional {
  Nonlinearity s = Nonlinearity::identity;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;

  /// C1 eta_c(0) + C2 eta_c(-r0) + C3 * trapezoid mean of eta_c.
  double linear_part(const Segment& eta, std::size_t coord) const;
  double value(double linear) const;
  double derivative(double linear) const;
};

struct Example5Params {
  SegmentFunctional f;
  SegmentFunctional g;
  double alpha = 0.0;  // phi(u)(theta) = alpha u(theta) + beta
  double beta = 0.0;
};

/// b(zeta, mu) = f(zeta + int phi dmu), sigma(zeta, mu) = g(zeta), with f and
/// g acting coordinatewise (sigma is diagonal, m = d).
class Example5Coefficients final : public CoefficientSet {
 public:
  Example5Coefficients(Example5Params params, std::size_t d);

  std::size_t state_dim() const override { return d_; }
  std::size_t noise_dim() const override { return d_; }
  std::unique_ptr<BoundCoefficients> bind(const EmpiricalMeasure& mu) const override;
  bool frechet_closed_form(const Segment& zeta, const EmpiricalMeasure& mu, const Segment& v,
                           std::span<double> out) const override;
  bool lions_closed_form(const Segment& zeta, const EmpiricalMeasure& atoms, std::span<const Segment> dirs,
                         std::span<double> out) const override;
  nlohmann::json describe() const override;

  const Example5Params& params() const { return params_; }

  /// Argument of f at coordinate c given L(zeta) and the averaged L(atoms).
  double f_argument(double linear_zeta, double mean_linear_atoms) const;

 private:
  Example5Params params_;
  std::size_t d_;
};

Example5Params example5_from_json(const nlohmann::json& spec);
CoefficientsPtr coefficients_from_json(const nlohmann::json& spec, std::size_t d);

// Evaluation helpers; non-finite output raises CoefficientEvaluationError.
Vec eval_b(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu);
Vec eval_sigma(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu);

/// Finite-difference step: 1e-5 (1 + ||zeta||) / (1 + ||v||).
double finite_difference_step(double base_norm, double direction_norm);

/// <Db(zeta, mu), v>: closed form when the set provides one, otherwise a
/// central difference in the direction v.
Vec frechet_pairing(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu, const Segment& v);
Vec frechet_pairing_fd(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu, const Segment& v);

/// Lions pairing at the empirical measure of `atoms` along per-atom
/// directions: closed form when available, otherwise the central
/// push-forward difference (b(mu o (Id + delta dir)^-1) - b(mu o (Id - delta dir)^-1)) / 2 delta.
Vec lions_pairing(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& atoms,
                  std::span<const Segment> dirs);
Vec lions_pairing_fd(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& atoms,
                     std::span<const Segment> dirs);

/// Where the hypothesis checkers draw their segments.
struct SampleShape {
  std::size_t nodes = 11;  // segment nodes including both ends
  double h = 0.1;
  double range = 5.0;  // node values drawn from [-range, range]
  std::size_t max_atoms = 4;
};

struct GrowthReport {
  double estimate = 0.0;       // max of (|b|^2 + ||sigma||^2) / (1 + ||zeta||^2 + mu(||.||^2)) at `range`
  double estimate_wide = 0.0;  // same at 4 x range
  bool unbounded = false;      // wide estimate more than doubles, or evaluation overflowed
  std::size_t samples = 0;
};

struct LipschitzReport {
  double estimate = 0.0;  // max of (|db|^2 + ||dsigma||^2) / (||zeta - eta||^2 + W2(mu, nu)^2)
  std::size_t samples = 0;
};

GrowthReport check_growth(const CoefficientSet& c, std::size_t n_samples, std::uint64_t rng_seed,
                          const SampleShape& shape = {});
LipschitzReport check_lipschitz(const CoefficientSet& c, std::size_t n_samples, std::uint64_t rng_seed,
                                const SampleShape& shape = {});

}  // namespace mvsde
