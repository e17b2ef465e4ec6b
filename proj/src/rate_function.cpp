#include "mvsde/rate_function.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "mvsde/errors.hpp"
#include "mvsde/parallel.hpp"

namespace mvsde {

SkeletonKind skeleton_kind_from_string(const std::string& s) {
  if (s == "ldp") return SkeletonKind::ldp;
  if (s == "mdp") return SkeletonKind::mdp;
  throw std::invalid_argument("unknown skeleton kind '" + s + "' (expected ldp or mdp)");
}

std::string to_string(SkeletonKind k) { return k == SkeletonKind::ldp ? "ldp" : "mdp"; }

RateProblem make_rate_problem(SimConfig cfg, Trajectory target, SkeletonKind kind) {
  cfg.validate();
  if (!(target.grid() == cfg.grid) || target.dim() != cfg.dim())
    throw GridMismatch("rate problem: target path lives on a different grid");
  const std::size_t history = cfg.grid.segment_nodes() * cfg.dim();
  for (std::size_t j = 0; j < history; ++j) {
    const double expected = kind == SkeletonKind::ldp ? cfg.xi[j] : 0.0;
    if (std::abs(target.values()[j] - expected) > 1e-12)
      throw PreconditionError(kind == SkeletonKind::ldp ? "rate problem: target must equal the initial segment on [-r0, 0]"
                                                        : "rate problem: target must vanish on [-r0, 0]");
  }
  Vec projected(cfg.dim());
  for (std::size_t idx = 0; idx < target.grid().n_nodes(); ++idx) {
    const auto node = target.node(idx);
    cfg.op->project_domain(node, projected);
    for (std::size_t c = 0; c < cfg.dim(); ++c)
      if (std::abs(projected[c] - node[c]) > 1e-12)
        throw PreconditionError("rate problem: target leaves the closure of D(A) at t = " +
                                std::to_string(target.grid().time_of_index(idx)));
  }
  RateProblem p;
  p.kind = kind;
  p.x0 = solve_deterministic_limit(cfg).x;
  p.cfg = std::move(cfg);
  p.target = std::move(target);
  return p;
}

Trajectory skeleton_path(const RateProblem& p, const Control& u) {
  return p.kind == SkeletonKind::ldp ? solve_skeleton(p.cfg, u, p.x0).x : solve_mdp_skeleton(p.cfg, u, p.x0).x;
}

RateCertificate rate_certificate(const RateProblem& p, const Control& u) {
  RateCertificate c;
  c.half_energy = 0.5 * u.energy();
  c.residual = sup_distance(skeleton_path(p, u), p.target);
  c.certified = c.residual <= p.tolerance;
  return c;
}

namespace {

/// u_k solving (g_{k+1} - g_k) / h = drift + sigma u_k in the least-squares
/// sense, ignoring A. `strict` demands a square, well-conditioned sigma.
Vec invert_skeleton(const RateProblem& p, bool strict) {
  const auto& cfg = p.cfg;
  const std::size_t d = cfg.dim(), m = cfg.noise_dim();
  if (strict && d != m) throw InversionUnavailable("inversion needs a square diffusion matrix");
  const double h = cfg.grid.h;
  const std::size_t n = cfg.grid.n_steps;
  Vec values(n * m);
  Vec drift(d), sigma(d * m);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<std::ptrdiff_t>(k);
    const Segment base = segment_at(p.x0, kk);
    const Segment gk = segment_at(p.target, kk);
    const auto dirac = EmpiricalMeasure::dirac(base);
    if (p.kind == SkeletonKind::ldp) {
      auto bound = cfg.coefficients->bind(dirac);
      bound->drift(gk, drift);
      bound->diffusion(gk, sigma);
    } else {
      drift = frechet_pairing(*cfg.coefficients, base, dirac, gk);
      cfg.coefficients->bind(dirac)->diffusion(base, sigma);
    }
    Eigen::MatrixXd s(d, m);
    Eigen::VectorXd rhs(d);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < m; ++c) s(r, c) = sigma[r * m + c];
      rhs(r) = (p.target.at_step(kk + 1)[r] - p.target.at_step(kk)[r]) / h - drift[r];
    }
    if (d == 1 && m == 1) {
      if (!(std::abs(s(0, 0)) > 0.0)) throw InversionUnavailable("diffusion is singular at t = " + std::to_string(k * h));
      values[k] = rhs(0) / s(0, 0);
      continue;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const auto last = sv.size() - 1;
    if (!(sv(last) > 0.0) || (strict && sv(0) / sv(last) >= 1e8))
      throw InversionUnavailable("diffusion is singular or ill-conditioned at t = " + std::to_string(k * h));
    const Eigen::VectorXd u = svd.solve(rhs);
    for (std::size_t j = 0; j < m; ++j) values[k * m + j] = u(j);
  }
  return values;
}

}  // namespace

RateResult rate_by_inversion(const RateProblem& p) {
  if (!dynamic_cast<const ZeroOperator*>(p.cfg.op.get()))
    throw InversionUnavailable("inversion needs the zero operator");
  RateResult r;
  r.control = Control(p.cfg.grid.n_steps, p.cfg.noise_dim(), p.cfg.grid.h, invert_skeleton(p, true));
  r.value = 0.5 * r.control.energy();
  r.method = "inversion";
  r.residual = sup_distance(skeleton_path(p, r.control), p.target);
  r.converged = true;
  return r;
}

namespace {

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class PenaltyObjective {
 public:
  PenaltyObjective(const RateProblem& p, double rho) : p_(p), rho_(rho) {}

  double operator()(const Vec& u) const {
    const Control c(p_.cfg.grid.n_steps, p_.cfg.noise_dim(), p_.cfg.grid.h, u);
    const double r = sup_distance(skeleton_path(p_, c), p_.target);
    return 0.5 * c.energy() + 0.5 * rho_ * r * r;
  }

  Vec gradient(const Vec& u, double fu) const {
    Vec g(u.size());
    const double step = p_.optimizer.fd_step;
    parallel_for(u.size(), p_.threads, [&](std::size_t i) {
      Vec shifted = u;
      shifted[i] += step;
      g[i] = ((*this)(shifted) - fu) / step;
    });
    return g;
  }

 private:
  const RateProblem& p_;
  double rho_;
};

void project_budget(Vec& u, double h, const std::optional<double>& budget) {
  if (!budget) return;
  const double energy = h * dot(u, u);
  if (energy > *budget) {
    const double scale = std::sqrt(*budget / energy);
    for (auto& x : u) x *= scale;
  }
}

struct Minimized {
  std::size_t iterations = 0;
  bool stationary = false;
};

/// L-BFGS with Armijo backtracking; falls back to steepest descent when the
/// quasi-Newton direction fails the line search.
Minimized minimize(const PenaltyObjective& f, Vec& u, const RateProblem& p) {
  const auto& opt = p.optimizer;
  const double h = p.cfg.grid.h;
  std::deque<std::pair<Vec, Vec>> memory;
  double fu = f(u);
  Vec g = f.gradient(u, fu);
  Minimized out;
  for (; out.iterations < opt.max_iterations; ++out.iterations) {
    Vec dir = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, y] = memory[i];
      alpha[i] = dot(s, dir) / dot(y, s);
      for (std::size_t j = 0; j < dir.size(); ++j) dir[j] -= alpha[i] * y[j];
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      const double gamma = dot(s, y) / dot(y, y);
      for (auto& x : dir) x *= gamma;
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double beta = dot(y, dir) / dot(y, s);
      for (std::size_t j = 0; j < dir.size(); ++j) dir[j] += (alpha[i] - beta) * s[j];
    }
    for (auto& x : dir) x = -x;

    bool accepted = false;
    Vec trial;
    double ft = fu;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (memory.empty()) break;
        memory.clear();
        dir = g;
        for (auto& x : dir) x = -x;
      }
      const double slope = dot(g, dir);
      if (!(slope < 0.0)) continue;
      double t = 1.0;
      if (memory.empty()) {
        double gmax = 0.0;
        for (double x : g) gmax = std::max(gmax, std::abs(x));
        t = std::min(1.0, 1.0 / gmax);
      }
      for (int k = 0; k < 50; ++k, t *= 0.5) {
        trial = u;
        for (std::size_t j = 0; j < u.size(); ++j) trial[j] += t * dir[j];
        project_budget(trial, h, p.budget);
        ft = f(trial);
        if (ft <= fu + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      out.stationary = true;
      break;
    }
    const Vec gt = f.gradient(trial, ft);
    Vec s(u.size()), y(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
      s[j] = trial[j] - u[j];
      y[j] = gt[j] - g[j];
    }
    const double decrease = fu - ft;
    u = std::move(trial);
    g = gt;
    if (dot(s, y) > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      memory.emplace_back(std::move(s), std::move(y));
      if (memory.size() > opt.memory) memory.pop_front();
    }
    fu = ft;
    if (decrease <= 1e-12 * std::max(1.0, std::abs(fu))) {
      out.stationary = true;
      ++out.iterations;
      break;
    }
  }
  return out;
}

}  // namespace

RateResult rate_by_penalty(const RateProblem& p, const Control* initial) {
  const std::size_t n = p.cfg.grid.n_steps, m = p.cfg.noise_dim();
  const double h = p.cfg.grid.h;
  Vec u(n * m, 0.0);
  if (initial) {
    u = initial->values();
  } else if (p.optimizer.warm_start) {
    try {
      u = invert_skeleton(p, false);
    } catch (const InversionUnavailable&) {
    }
  }
  if (u.size() != n * m) throw std::invalid_argument("rate_by_penalty: initial control has the wrong shape");
  project_budget(u, h, p.budget);
  RateResult r;
  r.method = "penalty";
  bool stationary = true;
  for (double rho : p.optimizer.penalties) {
    const auto step = minimize(PenaltyObjective(p, rho), u, p);
    r.iterations += step.iterations;
    stationary = step.stationary;
  }
  r.control = Control(n, m, h, std::move(u));
  r.value = 0.5 * r.control.energy();
  r.residual = sup_distance(skeleton_path(p, r.control), p.target);
  r.converged = stationary && r.residual <= p.tolerance;
  return r;
}

RateResult evaluate_rate(const RateProblem& p) {
  try {
    return rate_by_inversion(p);
  } catch (const InversionUnavailable&) {
    return rate_by_penalty(p);
  }
}

}  // namespace mvsde
