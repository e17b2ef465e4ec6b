#pragma once

#include <vector>

#include "mvsde/path_space.hpp"

namespace mvsde {

/// Equal-weight empirical measure over segments, the particle stand-in for
/// the law of X_t. Atoms are views; the caller keeps their storage alive.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(std::vector<Segment> atoms);

  /// Dirac mass at one segment.
  static EmpiricalMeasure dirac(const Segment& s) { return EmpiricalMeasure({s}); }

  std::size_t size() const { return atoms_.size(); }
  const std::vector<Segment>& atoms() const { return atoms_; }
  const Segment& operator[](std::size_t i) const { return atoms_[i]; }

 private:
  std::vector<Segment> atoms_;
};

/// (1/P) sum_i ||atom_i||_inf^2
double second_moment(const EmpiricalMeasure& mu);

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;
};

/// Exact minimum-cost perfect matching on a dense n x n cost matrix
/// (row-major), shortest augmenting paths with potentials, O(n^3).
Assignment solve_assignment(const std::vector<double>& cost, std::size_t n);

/// W2 between equal-size empirical measures with sup-norm ground cost.
/// Throws UnsupportedCheck when the atom counts differ.
double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// sqrt((1/P) sum_i ||mu_i - nu_i||_inf^2) for the coupling that pairs
/// atoms with equal labels; an upper bound on w2_assignment.
double w2_coupling_bound(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

}  // namespace mvsde
