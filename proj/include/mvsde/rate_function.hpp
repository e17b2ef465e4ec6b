#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvsde/solver.hpp"

namespace mvsde {

enum class SkeletonKind { ldp, mdp };

SkeletonKind skeleton_kind_from_string(const std::string& s);
std::string to_string(SkeletonKind k);

struct OptimizerSettings {
  std::vector<double> penalties{1e2, 1e3, 1e4, 1e5};
  std::size_t max_iterations = 200;  // per penalty level
  double fd_step = 1e-4;
  std::size_t memory = 8;
  /// Start from the control that reproduces g when A is ignored (least
  /// squares in sigma) instead of u = 0.
  bool warm_start = true;
};

/// Target path g and the skeleton it should be matched by.
struct RateProblem {
  SkeletonKind kind = SkeletonKind::ldp;
  SimConfig cfg;
  Trajectory target;
  Trajectory x0;
  std::optional<double> budget;
  double tolerance = 1e-4;
  OptimizerSettings optimizer;
  std::size_t threads = 1;
};

/// Computes X0 and checks the target: g = xi (ldp) or g = 0 (mdp) on
/// [-r0, 0], nodes in the closure of D(A). Throws PreconditionError.
RateProblem make_rate_problem(SimConfig cfg, Trajectory target, SkeletonKind kind);

/// X^{0,u} (ldp) or M^{0,u} (mdp).
Trajectory skeleton_path(const RateProblem& p, const Control& u);

struct RateResult {
  double value = 0.0;
  std::string method;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  Control control;
};

/// Closed-form inversion for A = 0 and invertible square sigma along g.
/// Throws InversionUnavailable otherwise.
RateResult rate_by_inversion(const RateProblem& p);

/// Minimizes 1/2 h sum |u_k|^2 + rho/2 sup|skeleton(u) - g|^2 over the
/// penalty schedule (L-BFGS with forward-difference gradients). The value
/// is an upper estimate only.
RateResult rate_by_penalty(const RateProblem& p, const Control* initial = nullptr);

/// Inversion when available, otherwise the penalty method.
RateResult evaluate_rate(const RateProblem& p);

struct RateCertificate {
  double half_energy = 0.0;
  double residual = 0.0;
  bool certified = false;  // residual <= tolerance, so I(g) <= half_energy
};

RateCertificate rate_certificate(const RateProblem& p, const Control& u);

}  // namespace mvsde
