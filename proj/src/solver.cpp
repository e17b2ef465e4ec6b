#include "mvsde/solver.hpp"

#include <cmath>
#include <stdexcept>

#include "mvsde/errors.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

Control::Control(std::size_t n_steps, std::size_t m, double h, Vec values, std::optional<double> budget)
    : n_steps_(n_steps), m_(m), h_(h), values_(std::move(values)) {
  if (values_.size() != n_steps_ * m_)
    throw std::invalid_argument("control: expected " + std::to_string(n_steps_ * m_) + " values, got " +
                                std::to_string(values_.size()));
  if (budget && energy() > *budget)
    throw std::invalid_argument("control: energy " + std::to_string(energy()) + " exceeds budget " +
                                std::to_string(*budget));
}

Control Control::constant(std::size_t n_steps, double h, const Vec& value) {
  Vec v;
  v.reserve(n_steps * value.size());
  for (std::size_t k = 0; k < n_steps; ++k) v.insert(v.end(), value.begin(), value.end());
  return Control(n_steps, value.size(), h, std::move(v));
}

double Control::energy() const {
  double s = 0.0;
  for (double x : values_) s += x * x;
  return h_ * s;
}

double SimConfig::mdp_scale() const {
  if (a_eps) return *a_eps;
  return std::pow(epsilon, a_gamma);
}

void SimConfig::validate() const {
  if (!op || !coefficients) throw std::invalid_argument("simulation: operator and coefficients are required");
  if (op->dimension() != coefficients->state_dim())
    throw std::invalid_argument("simulation: operator dimension differs from coefficient dimension");
  if (xi.size() != grid.segment_nodes() * dim())
    throw std::invalid_argument("simulation: initial segment needs " + std::to_string(grid.segment_nodes()) +
                                " nodes of dimension " + std::to_string(dim()));
  if (particles == 0) throw std::invalid_argument("simulation: particle count must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("simulation: epsilon must be nonnegative");
  if (!(a_gamma > 0.0 && a_gamma < 0.5)) throw std::invalid_argument("simulation: a(eps) exponent must lie in (0, 1/2)");
}

std::span<const double> SolutionBundle::increment(std::size_t particle, std::size_t step) const {
  const std::size_t n_steps = particles.at(particle).grid().n_steps;
  return {noise.data() + (particle * n_steps + step) * noise_dim, noise_dim};
}

namespace {

/// Per-step drift/diffusion supplier for one equation system. begin_step
/// sees the frozen segments of every particle at t_k; pre_point must not
/// depend on anything but that snapshot.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual void begin_step(std::size_t k, std::span<const Segment> own) = 0;
  virtual void pre_point(std::size_t k, std::size_t i, const Segment& own, std::span<const double> dw,
                         std::span<double> pre) = 0;
};

/// pre = x + h drift + sum_j (scale sigma_cj) dW_j
void euler_pre_point(std::span<const double> x, double h, std::span<const double> drift, std::span<const double> sigma,
                     double scale, std::span<const double> dw, std::span<double> pre) {
  const std::size_t m = dw.size();
  for (std::size_t c = 0; c < x.size(); ++c) {
    double v = x[c] + h * drift[c];
    for (std::size_t j = 0; j < m; ++j) v += (scale * sigma[c * m + j]) * dw[j];
    pre[c] = v;
  }
}

void add_control(std::span<double> drift, std::span<const double> sigma, std::span<const double> u) {
  const std::size_t m = u.size();
  for (std::size_t c = 0; c < drift.size(); ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += sigma[c * m + j] * u[j];
    drift[c] += s;
  }
}

SolutionBundle run_engine(const TimeGrid& grid, std::size_t d, std::size_t m, std::size_t particles,
                          std::span<const double> history, const MonotoneOperator& op, StepModel& model,
                          std::optional<std::uint64_t> noise_seed) {
  const std::size_t n = grid.n_steps;
  SolutionBundle out;
  out.noise_dim = m;
  out.k_variation.assign(particles, 0.0);
  for (std::size_t i = 0; i < particles; ++i) {
    Trajectory x(grid, d);
    std::copy(history.begin(), history.end(), x.values().begin());
    out.particles.push_back(std::move(x));
    out.k_processes.emplace_back(grid, d);
  }
  std::optional<GaussianStream> stream;
  if (noise_seed) {
    stream.emplace(*noise_seed);
    out.noise.assign(particles * n * m, 0.0);
  }
  const double sqrt_h = std::sqrt(grid.h);
  const Vec zero_noise(m, 0.0);
  std::vector<Segment> segments(particles);
  Vec pre(d), dk(d);

  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < particles; ++i) segments[i] = segment_at(out.particles[i], static_cast<std::ptrdiff_t>(k));
    model.begin_step(k, segments);
    for (std::size_t i = 0; i < particles; ++i) {
      std::span<const double> dw = zero_noise;
      if (stream) {
        std::span<double> slot(out.noise.data() + (i * n + k) * m, m);
        stream->standard_normals(i, k, slot);
        for (auto& z : slot) z *= sqrt_h;
        dw = slot;
      }
      model.pre_point(k, i, segments[i], dw, pre);
      auto& x = out.particles[i];
      auto& kp = out.k_processes[i];
      const auto step = static_cast<std::ptrdiff_t>(k);
      resolvent_step_into(op, grid.h, pre, x.at_step(step + 1), dk);
      double var = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        kp.at_step(step + 1)[c] = kp.at_step(step)[c] + dk[c];
        var += dk[c] * dk[c];
      }
      out.k_variation[i] += std::sqrt(var);
    }
  }
  return out;
}

ReflectedPath single_path(SolutionBundle&& b) {
  return {std::move(b.particles.front()), std::move(b.k_processes.front()), b.k_variation.front()};
}

// ---------------------------------------------------------------------------

/// Original-scale system, optionally controlled, with the law taken either
/// from its own particles or from a precomputed companion.
class PerturbedModel final : public StepModel {
 public:
  PerturbedModel(const SimConfig& cfg, double noise_scale, const Control* u, const SolutionBundle* companion)
      : cfg_(cfg), noise_scale_(noise_scale), u_(u), companion_(companion), drift_(cfg.dim()),
        sigma_(cfg.dim() * cfg.noise_dim()) {}

  void begin_step(std::size_t k, std::span<const Segment> own) override {
    if (companion_) {
      std::vector<Segment> law;
      law.reserve(companion_->size());
      for (const auto& p : companion_->particles) law.push_back(segment_at(p, static_cast<std::ptrdiff_t>(k)));
      bound_ = cfg_.coefficients->bind(EmpiricalMeasure(std::move(law)));
    } else {
      bound_ = cfg_.coefficients->bind(EmpiricalMeasure(std::vector<Segment>(own.begin(), own.end())));
    }
  }

  void pre_point(std::size_t k, std::size_t, const Segment& own, std::span<const double> dw,
                 std::span<double> pre) override {
    bound_->drift(own, drift_);
    bound_->diffusion(own, sigma_);
    if (u_) add_control(drift_, sigma_, u_->at(k));
    euler_pre_point(own.present(), cfg_.grid.h, drift_, sigma_, noise_scale_, dw, pre);
  }

 private:
  const SimConfig& cfg_;
  double noise_scale_;
  const Control* u_;
  const SolutionBundle* companion_;
  std::unique_ptr<BoundCoefficients> bound_;
  Vec drift_, sigma_;
};

/// Deterministic controlled path with the law frozen at delta_{X0_t}.
class SkeletonModel final : public StepModel {
 public:
  SkeletonModel(const SimConfig& cfg, const Control& u, const Trajectory& x0)
      : cfg_(cfg), u_(u), x0_(x0), drift_(cfg.dim()), sigma_(cfg.dim() * cfg.noise_dim()) {}

  void begin_step(std::size_t k, std::span<const Segment>) override {
    bound_ = cfg_.coefficients->bind(EmpiricalMeasure::dirac(segment_at(x0_, static_cast<std::ptrdiff_t>(k))));
  }

  void pre_point(std::size_t k, std::size_t, const Segment& own, std::span<const double> dw,
                 std::span<double> pre) override {
    bound_->drift(own, drift_);
    bound_->diffusion(own, sigma_);
    add_control(drift_, sigma_, u_.at(k));
    euler_pre_point(own.present(), cfg_.grid.h, drift_, sigma_, 0.0, dw, pre);
  }

 private:
  const SimConfig& cfg_;
  const Control& u_;
  const Trajectory& x0_;
  std::unique_ptr<BoundCoefficients> bound_;
  Vec drift_, sigma_;
};

/// Normalized deviation state S = (X - X0) / scale. Coefficients are
/// evaluated at the reconstructed X = X0 + scale S.
class DeviationModel final : public StepModel {
 public:
  DeviationModel(const SimConfig& cfg, const Trajectory& x0, double scale, double noise_scale, const Control* u,
                 const SolutionBundle* companion)
      : cfg_(cfg), x0_(x0), scale_(scale), noise_scale_(noise_scale), u_(u), companion_(companion),
        drift_(cfg.dim()), base_drift_(cfg.dim()), sigma_(cfg.dim() * cfg.noise_dim()) {}

  void begin_step(std::size_t k, std::span<const Segment> own) override {
    const Segment base = segment_at(x0_, static_cast<std::ptrdiff_t>(k));
    cfg_.coefficients->bind(EmpiricalMeasure::dirac(base))->drift(base, base_drift_);

    std::vector<Segment> law_source;
    if (companion_) {
      for (const auto& p : companion_->particles) law_source.push_back(segment_at(p, static_cast<std::ptrdiff_t>(k)));
    } else {
      law_source.assign(own.begin(), own.end());
    }
    law_buffers_.resize(law_source.size());
    std::vector<Segment> views;
    views.reserve(law_source.size());
    for (std::size_t i = 0; i < law_source.size(); ++i) {
      reconstruct(base, law_source[i], law_buffers_[i]);
      views.push_back(law_buffers_[i].view());
    }
    bound_ = cfg_.coefficients->bind(EmpiricalMeasure(std::move(views)));
    base_ = base;
  }

  void pre_point(std::size_t k, std::size_t i, const Segment& own, std::span<const double> dw,
                 std::span<double> pre) override {
    Segment reconstructed;
    if (companion_) {
      reconstruct(base_, own, scratch_);
      reconstructed = scratch_.view();
    } else {
      reconstructed = law_buffers_[i].view();
    }
    bound_->drift(reconstructed, drift_);
    bound_->diffusion(reconstructed, sigma_);
    for (std::size_t c = 0; c < drift_.size(); ++c) drift_[c] = (drift_[c] - base_drift_[c]) / scale_;
    if (u_) add_control(drift_, sigma_, u_->at(k));
    euler_pre_point(own.present(), cfg_.grid.h, drift_, sigma_, noise_scale_, dw, pre);
  }

 private:
  void reconstruct(const Segment& base, const Segment& state, SegmentBuffer& out) const {
    out.dim = base.dim();
    out.h = base.h();
    out.values.resize(base.data().size());
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] = base.data()[j] + scale_ * state.data()[j];
  }

  const SimConfig& cfg_;
  const Trajectory& x0_;
  double scale_;
  double noise_scale_;
  const Control* u_;
  const SolutionBundle* companion_;
  std::unique_ptr<BoundCoefficients> bound_;
  std::vector<SegmentBuffer> law_buffers_;
  SegmentBuffer scratch_;
  Segment base_;
  Vec drift_, base_drift_, sigma_;
};

/// Linearized systems around X0: the MDP skeleton (with control, no noise)
/// and the CLT limit (Lions term, noise sigma(X0_t, delta)).
class LinearizedModel final : public StepModel {
 public:
  LinearizedModel(const SimConfig& cfg, const Trajectory& x0, const Control* u, bool with_lions)
      : cfg_(cfg), x0_(x0), u_(u), with_lions_(with_lions), sigma_(cfg.dim() * cfg.noise_dim()) {}

  void begin_step(std::size_t k, std::span<const Segment> own) override {
    base_ = segment_at(x0_, static_cast<std::ptrdiff_t>(k));
    dirac_ = EmpiricalMeasure::dirac(base_);
    cfg_.coefficients->bind(dirac_)->diffusion(base_, sigma_);
    lions_.assign(cfg_.dim(), 0.0);
    if (with_lions_) {
      const EmpiricalMeasure replicated(std::vector<Segment>(own.size(), base_));
      lions_ = lions_pairing(*cfg_.coefficients, base_, replicated, own);
    }
  }

  void pre_point(std::size_t k, std::size_t, const Segment& own, std::span<const double> dw,
                 std::span<double> pre) override {
    Vec drift = frechet_pairing(*cfg_.coefficients, base_, dirac_, own);
    for (std::size_t c = 0; c < drift.size(); ++c) drift[c] += lions_[c];
    if (u_) add_control(drift, sigma_, u_->at(k));
    euler_pre_point(own.present(), cfg_.grid.h, drift, sigma_, 1.0, dw, pre);
  }

 private:
  const SimConfig& cfg_;
  const Trajectory& x0_;
  const Control* u_;
  bool with_lions_;
  Segment base_;
  EmpiricalMeasure dirac_;
  Vec sigma_, lions_;
};

void check_control(const SimConfig& cfg, const Control& u) {
  if (u.steps() != cfg.grid.n_steps || u.dim() != cfg.noise_dim())
    throw std::invalid_argument("control: expected " + std::to_string(cfg.grid.n_steps) + " steps of dimension " +
                                std::to_string(cfg.noise_dim()));
}

void check_x0(const SimConfig& cfg, const Trajectory& x0) {
  if (!(x0.grid() == cfg.grid) || x0.dim() != cfg.dim())
    throw GridMismatch("deterministic limit lives on a different grid");
}

std::uint64_t companion_seed(const SimConfig& cfg) {
  return cfg.share_companion_noise ? cfg.seed : derive_seed(cfg.seed, 0xC0,  1);
}

}  // namespace

// ---------------------------------------------------------------------------

SolutionBundle simulate_perturbed(const SimConfig& cfg) {
  cfg.validate();
  PerturbedModel model(cfg, std::sqrt(cfg.epsilon), nullptr, nullptr);
  return run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), cfg.particles, cfg.xi, *cfg.op, model, cfg.seed);
}

std::pair<SolutionBundle, SolutionBundle> simulate_controlled_with_companion(const SimConfig& cfg, const Control& u) {
  cfg.validate();
  check_control(cfg, u);
  SimConfig companion_cfg = cfg;
  companion_cfg.seed = companion_seed(cfg);
  SolutionBundle companion = simulate_perturbed(companion_cfg);
  PerturbedModel model(cfg, std::sqrt(cfg.epsilon), &u, &companion);
  SolutionBundle controlled =
      run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), cfg.particles, cfg.xi, *cfg.op, model, cfg.seed);
  return {std::move(controlled), std::move(companion)};
}

SolutionBundle simulate_controlled(const SimConfig& cfg, const Control& u) {
  return simulate_controlled_with_companion(cfg, u).first;
}

ReflectedPath solve_deterministic_limit(const SimConfig& cfg) {
  cfg.validate();
  SimConfig one = cfg;
  one.particles = 1;
  one.epsilon = 0.0;
  PerturbedModel model(one, 0.0, nullptr, nullptr);
  return single_path(run_engine(one.grid, one.dim(), one.noise_dim(), 1, one.xi, *one.op, model, std::nullopt));
}

ReflectedPath solve_skeleton(const SimConfig& cfg, const Control& u, const Trajectory& x0) {
  cfg.validate();
  check_control(cfg, u);
  check_x0(cfg, x0);
  SkeletonModel model(cfg, u, x0);
  return single_path(run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), 1, cfg.xi, *cfg.op, model, std::nullopt));
}

namespace {

void check_mdp_preconditions(const SimConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw PreconditionError("MDP deviation requires epsilon > 0");
  if (!(cfg.mdp_scale() > 0.0)) throw PreconditionError("MDP deviation requires a(eps) > 0");
  if (!cfg.op->zero_is_rest_point())
    throw PreconditionError("MDP deviation requires 0 in D(A) and 0 in A(0) for the configured operator");
}

}  // namespace

SolutionBundle simulate_mdp_deviation(const SimConfig& cfg, const Trajectory& x0) {
  cfg.validate();
  check_x0(cfg, x0);
  check_mdp_preconditions(cfg);
  const double a = cfg.mdp_scale();
  DeviationModel model(cfg, x0, a, std::sqrt(cfg.epsilon) / a, nullptr, nullptr);
  const Vec zero(cfg.xi.size(), 0.0);
  return run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), cfg.particles, zero, *cfg.op, model, cfg.seed);
}

std::pair<SolutionBundle, SolutionBundle> simulate_mdp_deviation(const SimConfig& cfg, const Trajectory& x0,
                                                                 const Control& u) {
  cfg.validate();
  check_x0(cfg, x0);
  check_control(cfg, u);
  check_mdp_preconditions(cfg);
  SimConfig companion_cfg = cfg;
  companion_cfg.seed = companion_seed(cfg);
  SolutionBundle companion = simulate_mdp_deviation(companion_cfg, x0);
  const double a = cfg.mdp_scale();
  DeviationModel model(cfg, x0, a, std::sqrt(cfg.epsilon) / a, &u, &companion);
  const Vec zero(cfg.xi.size(), 0.0);
  SolutionBundle controlled =
      run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), cfg.particles, zero, *cfg.op, model, cfg.seed);
  return {std::move(controlled), std::move(companion)};
}

ReflectedPath solve_mdp_skeleton(const SimConfig& cfg, const Control& u, const Trajectory& x0) {
  cfg.validate();
  check_x0(cfg, x0);
  check_control(cfg, u);
  if (!cfg.op->zero_is_rest_point())
    throw PreconditionError("MDP skeleton requires 0 in D(A) and 0 in A(0) for the configured operator");
  LinearizedModel model(cfg, x0, &u, false);
  const Vec zero(cfg.xi.size(), 0.0);
  return single_path(run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), 1, zero, *cfg.op, model, std::nullopt));
}

std::pair<SolutionBundle, SolutionBundle> simulate_clt_pair(const SimConfig& cfg, const Trajectory& x0) {
  cfg.validate();
  check_x0(cfg, x0);
  if (!(cfg.epsilon > 0.0)) throw PreconditionError("CLT deviation requires epsilon > 0");
  if (!cfg.op->zero_in_domain_closure()) throw PreconditionError("CLT deviation requires 0 in the closure of D(A)");
  const Vec zero(cfg.xi.size(), 0.0);
  DeviationModel deviation(cfg, x0, std::sqrt(cfg.epsilon), 1.0, nullptr, nullptr);
  SolutionBundle z_eps =
      run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), cfg.particles, zero, *cfg.op, deviation, cfg.seed);
  LinearizedModel limit(cfg, x0, nullptr, true);
  SolutionBundle z = run_engine(cfg.grid, cfg.dim(), cfg.noise_dim(), cfg.particles, zero, *cfg.op, limit, cfg.seed);
  return {std::move(z_eps), std::move(z)};
}

}  // namespace mvsde
