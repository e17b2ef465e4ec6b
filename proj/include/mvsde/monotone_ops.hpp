#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvsde {

using Vec = std::vector<double>;

/// A pair (x, y) with y in A(x).
struct GraphPair {
  Vec x;
  Vec y;
};

/// Maximal monotone operator A on R^d, exposed through its resolvent
/// J_lambda = (I + lambda A)^{-1} and the projection onto the closure of its
/// domain. Implementations are immutable and safe to share across threads.
class MonotoneOperator {
 public:
  virtual ~MonotoneOperator() = default;

  virtual std::size_t dimension() const = 0;

  /// Writes J_lambda(x) into `out`. `out` may alias `x`.
  virtual void resolvent(double lambda, std::span<const double> x, std::span<double> out) const = 0;

  /// Nearest point of the closure of D(A).
  virtual void project_domain(std::span<const double> x, std::span<double> out) const = 0;

  /// Graph membership y in A(x) up to `tol`, through the operator's defining
  /// variational inequality. The default refuses.
  virtual bool in_graph(std::span<const double> x, std::span<const double> y, double tol) const;

  virtual bool has_graph_sampler() const { return false; }
  virtual GraphPair sample_graph(std::mt19937_64& gen) const;

  virtual std::optional<Vec> interior_point() const { return std::nullopt; }

  /// Tagged record as accepted by the config loader.
  virtual nlohmann::json describe() const = 0;

  /// True when 0 lies in D(A) and 0 is in A(0).
  bool zero_is_rest_point(double tol = 1e-12) const;
  /// True when 0 lies in the closure of D(A).
  bool zero_in_domain_closure(double tol = 1e-12) const;

  Vec resolvent(double lambda, const Vec& x) const;
  Vec project_domain(const Vec& x) const;
};

using OperatorPtr = std::shared_ptr<const MonotoneOperator>;

class ZeroOperator final : public MonotoneOperator {
 public:
  using MonotoneOperator::project_domain;
  using MonotoneOperator::resolvent;
  explicit ZeroOperator(std::size_t d);
  std::size_t dimension() const override { return d_; }
  void resolvent(double lambda, std::span<const double> x, std::span<double> out) const override;
  void project_domain(std::span<const double> x, std::span<double> out) const override;
  bool in_graph(std::span<const double> x, std::span<const double> y, double tol) const override;
  bool has_graph_sampler() const override { return true; }
  GraphPair sample_graph(std::mt19937_64& gen) const override;
  std::optional<Vec> interior_point() const override { return Vec(d_, 0.0); }
  nlohmann::json describe() const override;

 private:
  std::size_t d_;
};

/// Normal cone of a closed convex set C. The resolvent is the metric
/// projection onto C for every lambda.
class NormalConeOperator : public MonotoneOperator {
 public:
  using MonotoneOperator::project_domain;
  using MonotoneOperator::resolvent;
  void resolvent(double, std::span<const double> x, std::span<double> out) const final {
    project_domain(x, out);
  }
  bool in_graph(std::span<const double> x, std::span<const double> y, double tol) const final;
  bool has_graph_sampler() const final { return true; }
  GraphPair sample_graph(std::mt19937_64& gen) const final;

 protected:
  virtual bool contains(std::span<const double> x, double tol) const = 0;
  /// sup over z in C of <y, z>; may be +inf.
  virtual double support(std::span<const double> y) const = 0;
  /// Scale used when drawing sample points around the set.
  virtual double sampling_scale() const = 0;
  virtual Vec sampling_center() const = 0;
};

/// C = {x : lower <= x <= upper}; infinite bounds allowed.
class BoxNormalCone final : public NormalConeOperator {
 public:
  using NormalConeOperator::project_domain;
  BoxNormalCone(Vec lower, Vec upper);
  std::size_t dimension() const override { return lower_.size(); }
  void project_domain(std::span<const double> x, std::span<double> out) const override;
  std::optional<Vec> interior_point() const override;
  nlohmann::json describe() const override;
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

 protected:
  bool contains(std::span<const double> x, double tol) const override;
  double support(std::span<const double> y) const override;
  double sampling_scale() const override;
  Vec sampling_center() const override;

 private:
  Vec lower_;
  Vec upper_;
};

/// C = {x : <normal, x> <= offset}.
class HalfspaceNormalCone final : public NormalConeOperator {
 public:
  using NormalConeOperator::project_domain;
  HalfspaceNormalCone(Vec normal, double offset);
  std::size_t dimension() const override { return normal_.size(); }
  void project_domain(std::span<const double> x, std::span<double> out) const override;
  std::optional<Vec> interior_point() const override;
  nlohmann::json describe() const override;

 protected:
  bool contains(std::span<const double> x, double tol) const override;
  double support(std::span<const double> y) const override;
  double sampling_scale() const override;
  Vec sampling_center() const override;

 private:
  Vec normal_;
  double offset_;
  double norm_sq_;
};

/// C = closed ball around `center`.
class BallNormalCone final : public NormalConeOperator {
 public:
  using NormalConeOperator::project_domain;
  BallNormalCone(Vec center, double radius);
  std::size_t dimension() const override { return center_.size(); }
  void project_domain(std::span<const double> x, std::span<double> out) const override;
  std::optional<Vec> interior_point() const override { return center_; }
  nlohmann::json describe() const override;

 protected:
  bool contains(std::span<const double> x, double tol) const override;
  double support(std::span<const double> y) const override;
  double sampling_scale() const override { return 2.0 * radius_ + 1.0; }
  Vec sampling_center() const override { return center_; }

 private:
  Vec center_;
  double radius_;
};

/// Subdifferential of phi = (convex piecewise quadratic) + indicator of
/// [lower, upper]. On piece i (between consecutive breakpoints) the
/// derivative is phi'(x) = slopes[i] * x + offsets[i].
class Subdifferential1D final : public MonotoneOperator {
 public:
  using MonotoneOperator::project_domain;
  using MonotoneOperator::resolvent;
  Subdifferential1D(double lower, double upper, Vec breakpoints, Vec slopes, Vec offsets);

  /// phi(x) = x^2 / 2 on the whole line.
  static Subdifferential1D half_square();

  std::size_t dimension() const override { return 1; }
  void resolvent(double lambda, std::span<const double> x, std::span<double> out) const override;
  void project_domain(std::span<const double> x, std::span<double> out) const override;
  bool in_graph(std::span<const double> x, std::span<const double> y, double tol) const override;
  bool has_graph_sampler() const override { return true; }
  GraphPair sample_graph(std::mt19937_64& gen) const override;
  std::optional<Vec> interior_point() const override;
  nlohmann::json describe() const override;

  double resolvent_scalar(double lambda, double x) const;
  /// [left derivative, right derivative] at x; +-inf at active interval ends.
  std::pair<double, double> subgradient_range(double x) const;

 private:
  std::size_t piece_of(double x) const;
  double piece_left(std::size_t i) const;
  double piece_right(std::size_t i) const;

  double lower_;
  double upper_;
  Vec breakpoints_;
  Vec slopes_;
  Vec offsets_;
};

/// Coordinatewise product of one-dimensional operators.
class ProductOperator final : public MonotoneOperator {
 public:
  using MonotoneOperator::project_domain;
  using MonotoneOperator::resolvent;
  explicit ProductOperator(std::vector<OperatorPtr> factors);
  std::size_t dimension() const override { return factors_.size(); }
  void resolvent(double lambda, std::span<const double> x, std::span<double> out) const override;
  void project_domain(std::span<const double> x, std::span<double> out) const override;
  bool in_graph(std::span<const double> x, std::span<const double> y, double tol) const override;
  bool has_graph_sampler() const override;
  GraphPair sample_graph(std::mt19937_64& gen) const override;
  std::optional<Vec> interior_point() const override;
  nlohmann::json describe() const override;

 private:
  std::vector<OperatorPtr> factors_;
};

/// Result of one backward-Euler split step for dX in -A(X) dt.
struct ResolventStep {
  Vec x_new;
  Vec dk;  // x - x_new; dk / lambda lies in A(x_new)
};

ResolventStep resolvent_step(const MonotoneOperator& op, double lambda, std::span<const double> x);

/// In-place kernel used by the solvers: x_new = J_lambda(pre), dk = pre - x_new.
/// Throws OperatorFailure if the resolvent produced a non-finite point.
void resolvent_step_into(const MonotoneOperator& op, double lambda, std::span<const double> pre,
                         std::span<double> x_new, std::span<double> dk);

struct MonotoneReport {
  double min_pairing = 0.0;
  std::size_t samples = 0;
  bool violated = false;
};

/// Minimum of <x1 - x2, y1 - y2> over sampled graph pairs. Flags a violation
/// when the minimum is below -(1e-10 + 1e-10 * |x1 - x2| |y1 - y2|).
MonotoneReport check_monotone(const MonotoneOperator& op, std::size_t n_samples, std::uint64_t rng_seed);

/// Builds an operator from a tagged record {kind: zero|box|halfspace|ball|subdiff1d|product, ...}.
OperatorPtr operator_from_json(const nlohmann::json& spec, std::size_t dimension);

inline constexpr double kGraphTolerance = 1e-10;

}  // namespace mvsde
