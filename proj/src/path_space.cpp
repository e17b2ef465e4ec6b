#include "mvsde/path_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mvsde/errors.hpp"

namespace mvsde {

namespace {

std::size_t exact_multiple(double length, double h, const char* what) {
  if (!(length >= 0.0)) throw std::invalid_argument(std::string(what) + " must be nonnegative");
  const double ratio = length / h;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument(std::string(what) + " is not an integer multiple of h");
  return static_cast<std::size_t>(n);
}

}  // namespace

TimeGrid TimeGrid::from_horizon(double h, double r0, double T) {
  if (!(h > 0.0)) throw std::invalid_argument("grid: h must be positive");
  TimeGrid g;
  g.h = h;
  g.n_history = exact_multiple(r0, h, "r0");
  g.n_steps = exact_multiple(T, h, "T");
  if (g.n_steps == 0) throw std::invalid_argument("grid: T must be positive");
  return g;
}

Trajectory::Trajectory(TimeGrid grid, std::size_t dim) : Trajectory(grid, dim, Vec(grid.n_nodes() * dim, 0.0)) {}

Trajectory::Trajectory(TimeGrid grid, std::size_t dim, Vec values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw std::invalid_argument("trajectory: dimension must be positive");
  if (values_.size() != grid_.n_nodes() * dim_)
    throw std::invalid_argument("trajectory: expected " + std::to_string(grid_.n_nodes() * dim_) + " values, got " +
                                std::to_string(values_.size()));
}

Segment segment_at(const Trajectory& x, std::ptrdiff_t k) {
  const auto& g = x.grid();
  if (k < 0 || k > static_cast<std::ptrdiff_t>(g.n_steps))
    throw std::out_of_range("segment_at: step " + std::to_string(k) + " outside [0, " + std::to_string(g.n_steps) + "]");
  const std::size_t first = static_cast<std::size_t>(k);  // index of node k - n_history
  return Segment(std::span<const double>(x.values()).subspan(first * x.dim(), g.segment_nodes() * x.dim()), x.dim(),
                 g.h);
}

double sup_norm(const Segment& s) {
  double best = 0.0;
  for (std::size_t j = 0; j < s.nodes(); ++j) {
    double sq = 0.0;
    for (double v : s.node(j)) sq += v * v;
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

double segment_distance(const Segment& a, const Segment& b) {
  if (a.data().size() != b.data().size() || a.dim() != b.dim())
    throw GridMismatch("segment_distance: segments live on different grids");
  double best = 0.0;
  const std::size_t d = a.dim();
  for (std::size_t j = 0; j < a.nodes(); ++j) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = a.data()[j * d + c] - b.data()[j * d + c];
      sq += diff * diff;
    }
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

double sup_distance(const Trajectory& x, const Trajectory& y) {
  if (!(x.grid() == y.grid()) || x.dim() != y.dim()) throw GridMismatch("sup_distance: trajectories on different grids");
  return segment_distance(Segment(x.values(), x.dim(), x.grid().h), Segment(y.values(), y.dim(), y.grid().h));
}

ProjectedSegment project_initial_segment(const MonotoneOperator& op, std::span<const double> values) {
  const std::size_t d = op.dimension();
  if (values.size() % d != 0) throw std::invalid_argument("initial segment: size is not a multiple of dimension");
  ProjectedSegment out{Vec(values.begin(), values.end()), 0.0};
  for (std::size_t j = 0; j < values.size() / d; ++j) {
    std::span<double> node(out.values.data() + j * d, d);
    op.project_domain(values.subspan(j * d, d), node);
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += (node[c] - values[j * d + c]) * (node[c] - values[j * d + c]);
    out.max_shift = std::max(out.max_shift, std::sqrt(sq));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& x) {
  os << 't';
  for (std::size_t c = 0; c < x.dim(); ++c) os << ",x" << (c + 1);
  os << '\n';
  char buf[32];
  for (std::size_t idx = 0; idx < x.grid().n_nodes(); ++idx) {
    std::snprintf(buf, sizeof buf, "%.17g", x.grid().time_of_index(idx));
    os << buf;
    for (double v : x.node(idx)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& x) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trajectory_csv(os, x);
}

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory csv: empty input");
  const std::size_t d = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (line.rfind("t,", 0) != 0 || d == 0) throw std::runtime_error("trajectory csv: header must be 't,x1..xd'");

  Vec times, values;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      double v;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("trajectory csv: row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
      (col == 0 ? times : values).push_back(v);
      ++col;
    }
    if (col != d + 1) throw std::runtime_error("trajectory csv: row " + std::to_string(row) + " has wrong column count");
  }
  if (times.size() < 2) throw std::runtime_error("trajectory csv: need at least two rows");
  const double h = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(h > 0.0)) throw std::runtime_error("trajectory csv: times must ascend");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - times[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(times[i])))
      throw std::runtime_error("trajectory csv: times are not on a uniform grid");
  const double n_hist = std::round(-times.front() / h);
  if (n_hist < 0.0 || std::abs(times.front() + n_hist * h) > 1e-9 * std::max(1.0, std::abs(times.front())))
    throw std::runtime_error("trajectory csv: first time must be -r0 with r0 a multiple of h");
  TimeGrid g;
  g.h = h;
  g.n_history = static_cast<std::size_t>(n_hist);
  g.n_steps = times.size() - 1 - g.n_history;
  return Trajectory(g, d, std::move(values));
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_trajectory_csv(is);
}

}  // namespace mvsde
