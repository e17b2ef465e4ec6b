#include "mvsde/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "mvsde/errors.hpp"

namespace mvsde {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw CoefficientEvaluationError(std::string(what) + " produced a non-finite value");
}

class CallableBound final : public BoundCoefficients {
 public:
  CallableBound(const CallableCoefficients::Field& b, const CallableCoefficients::Field& sigma, EmpiricalMeasure mu)
      : b_(b), sigma_(sigma), mu_(std::move(mu)) {}
  void drift(const Segment& zeta, std::span<double> out) const override { b_(zeta, mu_, out); }
  void diffusion(const Segment& zeta, std::span<double> out) const override { sigma_(zeta, mu_, out); }

 private:
  const CallableCoefficients::Field& b_;
  const CallableCoefficients::Field& sigma_;
  EmpiricalMeasure mu_;
};

class Example5Bound final : public BoundCoefficients {
 public:
  Example5Bound(const Example5Coefficients& owner, Vec mean_linear)
      : owner_(owner), mean_linear_(std::move(mean_linear)) {}

  void drift(const Segment& zeta, std::span<double> out) const override {
    const auto& f = owner_.params().f;
    for (std::size_t c = 0; c < out.size(); ++c)
      out[c] = f.value(owner_.f_argument(f.linear_part(zeta, c), mean_linear_[c]));
  }

  void diffusion(const Segment& zeta, std::span<double> out) const override {
    const auto& g = owner_.params().g;
    const std::size_t d = mean_linear_.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) out[c * d + c] = g.value(g.linear_part(zeta, c));
  }

 private:
  const Example5Coefficients& owner_;
  Vec mean_linear_;
};

double frobenius_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double norm_sq(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return s;
}

/// Random segments for the hypothesis checkers: iid node values with a
/// random amplitude in [0, range].
struct SegmentSampler {
  SampleShape shape;
  std::size_t d;
  std::mt19937_64 gen;

  SegmentBuffer draw(double range) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double amplitude = range * std::abs(unit(gen));
    SegmentBuffer s{Vec(shape.nodes * d), d, shape.h};
    for (auto& v : s.values) v = amplitude * unit(gen);
    return s;
  }

  std::vector<SegmentBuffer> draw_atoms(std::size_t count, double range) {
    std::vector<SegmentBuffer> atoms;
    for (std::size_t i = 0; i < count; ++i) atoms.push_back(draw(range));
    return atoms;
  }

  std::size_t atom_count() {
    return std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, shape.max_atoms))(gen);
  }
};

EmpiricalMeasure measure_of(const std::vector<SegmentBuffer>& atoms) {
  std::vector<Segment> views;
  for (const auto& a : atoms) views.push_back(a.view());
  return EmpiricalMeasure(std::move(views));
}

}  // namespace

// ---------------------------------------------------------------------------

CallableCoefficients::CallableCoefficients(std::size_t d, std::size_t m, Field b, Field sigma)
    : d_(d), m_(m), b_(std::move(b)), sigma_(std::move(sigma)) {
  if (d_ == 0 || m_ == 0) throw std::invalid_argument("coefficients: dimensions must be positive");
}

std::unique_ptr<BoundCoefficients> CallableCoefficients::bind(const EmpiricalMeasure& mu) const {
  return std::make_unique<CallableBound>(b_, sigma_, mu);
}

// ---------------------------------------------------------------------------

Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "identity") return Nonlinearity::identity;
  if (s == "tanh") return Nonlinearity::tanh;
  throw std::invalid_argument("unknown nonlinearity '" + s + "' (expected identity or tanh)");
}

std::string to_string(Nonlinearity s) { return s == Nonlinearity::tanh ? "tanh" : "identity"; }

double SegmentFunctional::linear_part(const Segment& eta, std::size_t coord) const {
  const std::size_t d = eta.dim();
  const std::size_t n = eta.nodes();
  const auto data = eta.data();
  double value = c1 * data[(n - 1) * d + coord] + c2 * data[coord];
  if (c3 != 0.0) {
    double mean;
    if (n == 1) {
      mean = data[coord];
    } else {
      double s = 0.5 * (data[coord] + data[(n - 1) * d + coord]);
      for (std::size_t j = 1; j + 1 < n; ++j) s += data[j * d + coord];
      mean = s / static_cast<double>(n - 1);
    }
    value += c3 * mean;
  }
  return value;
}

double SegmentFunctional::value(double linear) const {
  const double arg = c0 + linear;
  return s == Nonlinearity::tanh ? std::tanh(arg) : arg;
}

double SegmentFunctional::derivative(double linear) const {
  if (s == Nonlinearity::identity) return 1.0;
  const double t = std::tanh(c0 + linear);
  return 1.0 - t * t;
}

// ---------------------------------------------------------------------------

Example5Coefficients::Example5Coefficients(Example5Params params, std::size_t d) : params_(params), d_(d) {
  if (d_ == 0) throw std::invalid_argument("coefficients: dimension must be positive");
}

double Example5Coefficients::f_argument(double linear_zeta, double mean_linear_atoms) const {
  const auto& f = params_.f;
  // L is linear and L(const beta) = beta (C1 + C2 + C3).
  return linear_zeta + params_.alpha * mean_linear_atoms + params_.beta * (f.c1 + f.c2 + f.c3);
}

std::unique_ptr<BoundCoefficients> Example5Coefficients::bind(const EmpiricalMeasure& mu) const {
  Vec mean(d_, 0.0);
  if (params_.alpha != 0.0) {
    for (const auto& atom : mu.atoms())
      for (std::size_t c = 0; c < d_; ++c) mean[c] += params_.f.linear_part(atom, c);
    for (auto& m : mean) m /= static_cast<double>(mu.size());
  }
  return std::make_unique<Example5Bound>(*this, std::move(mean));
}

bool Example5Coefficients::frechet_closed_form(const Segment& zeta, const EmpiricalMeasure& mu, const Segment& v,
                                               std::span<double> out) const {
  const auto& f = params_.f;
  for (std::size_t c = 0; c < d_; ++c) {
    double mean = 0.0;
    if (params_.alpha != 0.0) {
      for (const auto& atom : mu.atoms()) mean += f.linear_part(atom, c);
      mean /= static_cast<double>(mu.size());
    }
    out[c] = f.derivative(f_argument(f.linear_part(zeta, c), mean)) * f.linear_part(v, c);
  }
  return true;
}

bool Example5Coefficients::lions_closed_form(const Segment& zeta, const EmpiricalMeasure& atoms,
                                             std::span<const Segment> dirs, std::span<double> out) const {
  const auto& f = params_.f;
  const double p = static_cast<double>(atoms.size());
  for (std::size_t c = 0; c < d_; ++c) {
    double mean_atoms = 0.0, mean_dirs = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (params_.alpha != 0.0) mean_atoms += f.linear_part(atoms[i], c);
      mean_dirs += f.linear_part(dirs[i], c);
    }
    mean_atoms /= p;
    mean_dirs /= p;
    out[c] = f.derivative(f_argument(f.linear_part(zeta, c), mean_atoms)) * params_.alpha * mean_dirs;
  }
  return true;
}

namespace {

nlohmann::json functional_to_json(const SegmentFunctional& f) {
  return {{"s", to_string(f.s)}, {"c0", f.c0}, {"C1", f.c1}, {"C2", f.c2}, {"C3", f.c3}};
}

SegmentFunctional functional_from_json(const nlohmann::json& j, const char* name) {
  static const std::set<std::string> known{"s", "c0", "C1", "C2", "C3"};
  if (!j.is_object()) throw std::invalid_argument(std::string("coefficients.") + name + ": expected a mapping");
  for (const auto& item : j.items())
    if (!known.contains(item.key()))
      throw std::invalid_argument(std::string("coefficients.") + name + ": unknown key '" + item.key() + "'");
  SegmentFunctional f;
  f.s = nonlinearity_from_string(j.value("s", std::string("identity")));
  f.c0 = j.value("c0", 0.0);
  f.c1 = j.value("C1", 0.0);
  f.c2 = j.value("C2", 0.0);
  f.c3 = j.value("C3", 0.0);
  return f;
}

}  // namespace

nlohmann::json Example5Coefficients::describe() const {
  return {{"kind", "example5"},
          {"f", functional_to_json(params_.f)},
          {"g", functional_to_json(params_.g)},
          {"phi", {{"alpha", params_.alpha}, {"beta", params_.beta}}}};
}

Example5Params example5_from_json(const nlohmann::json& spec) {
  static const std::set<std::string> known{"kind", "f", "g", "phi"};
  for (const auto& item : spec.items())
    if (!known.contains(item.key())) throw std::invalid_argument("coefficients: unknown key '" + item.key() + "'");
  for (const char* key : {"f", "g"})
    if (!spec.contains(key)) throw std::invalid_argument(std::string("coefficients: missing required key '") + key + "'");
  Example5Params p;
  p.f = functional_from_json(spec["f"], "f");
  p.g = functional_from_json(spec["g"], "g");
  if (spec.contains("phi")) {
    const auto& phi = spec["phi"];
    for (const auto& item : phi.items())
      if (item.key() != "alpha" && item.key() != "beta")
        throw std::invalid_argument("coefficients.phi: unknown key '" + item.key() + "'");
    p.alpha = phi.value("alpha", 0.0);
    p.beta = phi.value("beta", 0.0);
  }
  return p;
}

CoefficientsPtr coefficients_from_json(const nlohmann::json& spec, std::size_t d) {
  const std::string kind = spec.value("kind", std::string("example5"));
  if (kind != "example5") throw std::invalid_argument("coefficients: unknown kind '" + kind + "'");
  return std::make_shared<Example5Coefficients>(example5_from_json(spec), d);
}

// ---------------------------------------------------------------------------

Vec eval_b(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu) {
  Vec out(c.state_dim());
  c.bind(mu)->drift(zeta, out);
  require_finite(out, "drift b");
  return out;
}

Vec eval_sigma(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu) {
  Vec out(c.state_dim() * c.noise_dim());
  c.bind(mu)->diffusion(zeta, out);
  require_finite(out, "diffusion sigma");
  return out;
}

double finite_difference_step(double base_norm, double direction_norm) {
  return 1e-5 * (1.0 + base_norm) / (1.0 + direction_norm);
}

Vec frechet_pairing_fd(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu, const Segment& v) {
  if (v.data().size() != zeta.data().size()) throw GridMismatch("frechet_pairing: direction on a different grid");
  const double delta = finite_difference_step(sup_norm(zeta), sup_norm(v));
  SegmentBuffer plus = SegmentBuffer::copy_of(zeta), minus = SegmentBuffer::copy_of(zeta);
  for (std::size_t i = 0; i < plus.values.size(); ++i) {
    plus.values[i] += delta * v.data()[i];
    minus.values[i] -= delta * v.data()[i];
  }
  auto bound = c.bind(mu);
  Vec bp(c.state_dim()), bm(c.state_dim());
  bound->drift(plus.view(), bp);
  bound->drift(minus.view(), bm);
  for (std::size_t i = 0; i < bp.size(); ++i) bp[i] = (bp[i] - bm[i]) / (2.0 * delta);
  require_finite(bp, "frechet pairing");
  return bp;
}

Vec frechet_pairing(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& mu, const Segment& v) {
  Vec out(c.state_dim());
  if (c.frechet_closed_form(zeta, mu, v, out)) {
    require_finite(out, "frechet pairing");
    return out;
  }
  return frechet_pairing_fd(c, zeta, mu, v);
}

Vec lions_pairing_fd(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& atoms,
                     std::span<const Segment> dirs) {
  if (dirs.size() != atoms.size()) throw std::invalid_argument("lions_pairing: atoms and directions differ in length");
  double dir_norm = 0.0;
  for (const auto& d : dirs) dir_norm = std::max(dir_norm, sup_norm(d));
  const double delta = finite_difference_step(sup_norm(zeta), dir_norm);

  auto shifted = [&](double sign) {
    std::vector<SegmentBuffer> moved;
    moved.reserve(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      SegmentBuffer b = SegmentBuffer::copy_of(atoms[i]);
      if (dirs[i].data().size() != b.values.size()) throw GridMismatch("lions_pairing: direction on a different grid");
      for (std::size_t k = 0; k < b.values.size(); ++k) b.values[k] += sign * delta * dirs[i].data()[k];
      moved.push_back(std::move(b));
    }
    return moved;
  };
  const auto plus = shifted(1.0), minus = shifted(-1.0);
  Vec bp(c.state_dim()), bm(c.state_dim());
  c.bind(measure_of(plus))->drift(zeta, bp);
  c.bind(measure_of(minus))->drift(zeta, bm);
  for (std::size_t i = 0; i < bp.size(); ++i) bp[i] = (bp[i] - bm[i]) / (2.0 * delta);
  require_finite(bp, "lions pairing");
  return bp;
}

Vec lions_pairing(const CoefficientSet& c, const Segment& zeta, const EmpiricalMeasure& atoms,
                  std::span<const Segment> dirs) {
  if (dirs.size() != atoms.size()) throw std::invalid_argument("lions_pairing: atoms and directions differ in length");
  Vec out(c.state_dim());
  if (c.lions_closed_form(zeta, atoms, dirs, out)) {
    require_finite(out, "lions pairing");
    return out;
  }
  return lions_pairing_fd(c, zeta, atoms, dirs);
}

// ---------------------------------------------------------------------------

GrowthReport check_growth(const CoefficientSet& c, std::size_t n_samples, std::uint64_t rng_seed,
                          const SampleShape& shape) {
  GrowthReport report;
  const std::size_t d = c.state_dim();
  auto run = [&](double range, std::uint64_t seed) {
    SegmentSampler sampler{shape, d, std::mt19937_64(seed)};
    double best = 0.0;
    Vec b(d), sigma(d * c.noise_dim());
    for (std::size_t i = 0; i < n_samples; ++i) {
      const SegmentBuffer zeta = sampler.draw(range);
      const auto atoms = sampler.draw_atoms(sampler.atom_count(), range);
      const auto mu = measure_of(atoms);
      auto bound = c.bind(mu);
      bound->drift(zeta.view(), b);
      bound->diffusion(zeta.view(), sigma);
      const double zn = sup_norm(zeta.view());
      const double ratio = (norm_sq(b) + norm_sq(sigma)) / (1.0 + zn * zn + second_moment(mu));
      if (!std::isfinite(ratio)) return std::numeric_limits<double>::infinity();
      best = std::max(best, ratio);
    }
    return best;
  };
  report.estimate = run(shape.range, rng_seed);
  report.estimate_wide = run(4.0 * shape.range, rng_seed ^ 0x5bd1e995u);
  report.samples = n_samples;
  report.unbounded = !std::isfinite(report.estimate) || !std::isfinite(report.estimate_wide) ||
                     report.estimate_wide > 2.0 * report.estimate + 1e-12;
  return report;
}

LipschitzReport check_lipschitz(const CoefficientSet& c, std::size_t n_samples, std::uint64_t rng_seed,
                                const SampleShape& shape) {
  const std::size_t d = c.state_dim();
  const std::size_t m = c.noise_dim();
  SegmentSampler sampler{shape, d, std::mt19937_64(rng_seed)};
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  LipschitzReport report;
  Vec b1(d), b2(d), s1(d * m), s2(d * m);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t p = sampler.atom_count();
    const SegmentBuffer zeta = sampler.draw(shape.range);
    const auto atoms = sampler.draw_atoms(p, shape.range);
    SegmentBuffer eta;
    std::vector<SegmentBuffer> atoms2;
    if (i % 2 == 0) {
      // Nearby pair: probes the local slope.
      const double scale = 1e-3 * shape.range;
      eta = zeta;
      for (auto& v : eta.values) v += scale * unit(sampler.gen);
      atoms2 = atoms;
      for (auto& a : atoms2)
        for (auto& v : a.values) v += scale * unit(sampler.gen);
    } else {
      eta = sampler.draw(shape.range);
      atoms2 = sampler.draw_atoms(p, shape.range);
    }
    const auto mu = measure_of(atoms), nu = measure_of(atoms2);
    auto bm = c.bind(mu), bn = c.bind(nu);
    bm->drift(zeta.view(), b1);
    bn->drift(eta.view(), b2);
    bm->diffusion(zeta.view(), s1);
    bn->diffusion(eta.view(), s2);
    const double dz = segment_distance(zeta.view(), eta.view());
    const double w = w2_assignment(mu, nu);
    const double denom = dz * dz + w * w;
    if (denom <= 0.0) continue;
    const double ratio = (frobenius_sq(b1, b2) + frobenius_sq(s1, s2)) / denom;
    report.estimate = std::max(report.estimate, ratio);
    ++report.samples;
  }
  return report;
}

}  // namespace mvsde
