#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mvsde/monotone_ops.hpp"

namespace mvsde {

/// Uniform grid on [-r0, T] with t_k = k h, k = -n_history .. n_steps.
struct TimeGrid {
  double h = 0.0;
  std::size_t n_history = 0;
  std::size_t n_steps = 0;

  /// Requires r0 and T to be integer multiples of h (relative slack 1e-9).
  static TimeGrid from_horizon(double h, double r0, double T);

  double r0() const { return h * static_cast<double>(n_history); }
  double horizon() const { return h * static_cast<double>(n_steps); }
  std::size_t n_nodes() const { return n_history + n_steps + 1; }
  std::size_t segment_nodes() const { return n_history + 1; }
  /// Storage index of grid time t_k.
  std::size_t index_of_step(std::ptrdiff_t k) const { return static_cast<std::size_t>(k + static_cast<std::ptrdiff_t>(n_history)); }
  double time_of_index(std::size_t idx) const {
    return h * (static_cast<double>(idx) - static_cast<double>(n_history));
  }

  bool operator==(const TimeGrid&) const = default;
};

/// Read-only view of a path slice on [-r0, 0]; node j sits at theta = -r0 + j h.
/// Values are stored node-major: node j occupies [j d, (j + 1) d).
class Segment {
 public:
  Segment() = default;
  Segment(std::span<const double> data, std::size_t dim, double h) : data_(data), dim_(dim), h_(h) {}

  std::size_t dim() const { return dim_; }
  std::size_t nodes() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  double h() const { return h_; }
  double r0() const { return h_ * static_cast<double>(nodes() - 1); }
  std::span<const double> data() const { return data_; }
  std::span<const double> node(std::size_t j) const { return data_.subspan(j * dim_, dim_); }
  /// zeta(0)
  std::span<const double> present() const { return node(nodes() - 1); }
  /// zeta(-r0)
  std::span<const double> oldest() const { return node(0); }

 private:
  std::span<const double> data_;
  std::size_t dim_ = 0;
  double h_ = 0.0;
};

/// Owning counterpart of Segment, for perturbed copies and measure atoms.
struct SegmentBuffer {
  Vec values;
  std::size_t dim = 0;
  double h = 0.0;

  static SegmentBuffer copy_of(const Segment& s) { return {Vec(s.data().begin(), s.data().end()), s.dim(), s.h()}; }
  Segment view() const { return Segment(values, dim, h); }
};

/// Continuous path on [-r0, T] stored at grid nodes; piecewise linear in time.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(TimeGrid grid, std::size_t dim);
  Trajectory(TimeGrid grid, std::size_t dim, Vec values);

  const TimeGrid& grid() const { return grid_; }
  std::size_t dim() const { return dim_; }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }

  std::span<const double> node(std::size_t idx) const { return {values_.data() + idx * dim_, dim_}; }
  std::span<double> node(std::size_t idx) { return {values_.data() + idx * dim_, dim_}; }
  std::span<const double> at_step(std::ptrdiff_t k) const { return node(grid_.index_of_step(k)); }
  std::span<double> at_step(std::ptrdiff_t k) { return node(grid_.index_of_step(k)); }

 private:
  TimeGrid grid_;
  std::size_t dim_ = 0;
  Vec values_;
};

/// Segment X_{t_k}: nodes k - n_history .. k. Requires 0 <= k <= n_steps.
Segment segment_at(const Trajectory& x, std::ptrdiff_t k);

double sup_norm(const Segment& s);
/// max_j |a(node j) - b(node j)|
double segment_distance(const Segment& a, const Segment& b);
double sup_distance(const Trajectory& x, const Trajectory& y);

struct ProjectedSegment {
  Vec values;
  double max_shift = 0.0;
};

/// Projects initial node values onto the closure of D(A), node by node.
ProjectedSegment project_initial_segment(const MonotoneOperator& op, std::span<const double> values);

/// CSV with header `t,x1..xd`, one row per grid node, ascending time.
void write_trajectory_csv(std::ostream& os, const Trajectory& x);
void write_trajectory_csv(const std::string& path, const Trajectory& x);
Trajectory read_trajectory_csv(std::istream& is);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace mvsde
