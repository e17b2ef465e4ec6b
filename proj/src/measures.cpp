#include "mvsde/measures.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mvsde/errors.hpp"

namespace mvsde {

EmpiricalMeasure::EmpiricalMeasure(std::vector<Segment> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("EmpiricalMeasure: needs at least one atom");
  for (const auto& a : atoms_)
    if (a.dim() != atoms_[0].dim() || a.nodes() != atoms_[0].nodes() || a.h() != atoms_[0].h())
      throw GridMismatch("EmpiricalMeasure: atoms must share dimension and grid");
}

double second_moment(const EmpiricalMeasure& mu) {
  double s = 0.0;
  for (const auto& a : mu.atoms()) {
    const double n = sup_norm(a);
    s += n * n;
  }
  return s / static_cast<double>(mu.size());
}

Assignment solve_assignment(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("solve_assignment: cost matrix must be n x n");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_slack(n + 1);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t r = row_of_col[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double slack = cost[(r - 1) * n + (c - 1)] - u[r] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[row_of_col[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (row_of_col[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      row_of_col[col0] = row_of_col[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  Assignment a;
  a.column_of_row.assign(n, 0);
  for (std::size_t c = 1; c <= n; ++c) a.column_of_row[row_of_col[c] - 1] = c - 1;
  for (std::size_t r = 0; r < n; ++r) a.cost += cost[r * n + a.column_of_row[r]];
  return a;
}

double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size())
    throw UnsupportedCheck("w2_assignment: atom counts differ (" + std::to_string(mu.size()) + " vs " +
                           std::to_string(nu.size()) + "); use w2_coupling_bound");
  const std::size_t n = mu.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dist = segment_distance(mu[i], nu[j]);
      cost[i * n + j] = dist * dist;
    }
  const auto a = solve_assignment(cost, n);
  return std::sqrt(std::max(0.0, a.cost) / static_cast<double>(n));
}

double w2_coupling_bound(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size()) throw std::invalid_argument("w2_coupling_bound: measures must share particle labels");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double dist = segment_distance(mu[i], nu[i]);
    s += dist * dist;
  }
  return std::sqrt(s / static_cast<double>(mu.size()));
}

}  // namespace mvsde
