#include "mvsde/monotone_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "mvsde/errors.hpp"

namespace mvsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vec gaussian_vector(std::size_t d, std::mt19937_64& gen) {
  std::normal_distribution<double> n01;
  Vec v(d);
  for (auto& x : v) x = n01(gen);
  return v;
}

double json_bound(const nlohmann::json& v, double infinite_value) {
  if (v.is_null()) return infinite_value;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == ".inf") return kInf;
    if (s == "-inf" || s == "-.inf") return -kInf;
    throw std::invalid_argument("bound must be a number or 'inf'/'-inf', got '" + s + "'");
  }
  return v.get<double>();
}

Vec json_bounds(const nlohmann::json& v, std::size_t d, double infinite_value) {
  if (!v.is_array()) return Vec(d, json_bound(v, infinite_value));
  if (v.size() != d) throw std::invalid_argument("bound vector has length " + std::to_string(v.size()) +
                                                 ", expected " + std::to_string(d));
  Vec out;
  for (const auto& e : v) out.push_back(json_bound(e, infinite_value));
  return out;
}

Vec json_vector(const nlohmann::json& v, std::size_t d, const char* name) {
  if (!v.is_array()) return Vec(d, v.get<double>());
  auto out = v.get<Vec>();
  if (out.size() != d)
    throw std::invalid_argument(std::string(name) + " has length " + std::to_string(out.size()) + ", expected " +
                                std::to_string(d));
  return out;
}

void require_keys(const nlohmann::json& spec, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional) {
  std::set<std::string> known{"kind"};
  for (const char* k : required) {
    if (!spec.contains(k)) throw std::invalid_argument(std::string("operator: missing required key '") + k + "'");
    known.insert(k);
  }
  for (const char* k : optional) known.insert(k);
  for (const auto& item : spec.items())
    if (!known.contains(item.key())) throw std::invalid_argument("operator: unknown key '" + item.key() + "'");
}

nlohmann::json bound_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

bool MonotoneOperator::in_graph(std::span<const double>, std::span<const double>, double) const {
  throw UnsupportedCheck("graph membership is not available for this operator");
}

GraphPair MonotoneOperator::sample_graph(std::mt19937_64&) const {
  throw UnsupportedCheck("operator does not provide a graph sampler");
}

bool MonotoneOperator::zero_is_rest_point(double tol) const {
  const Vec zero(dimension(), 0.0);
  if (!zero_in_domain_closure(tol)) return false;
  // 0 in A(0) iff J_lambda(0) = 0 for some (equivalently every) lambda > 0.
  const Vec r = resolvent(1.0, zero);
  return norm(r) <= tol;
}

bool MonotoneOperator::zero_in_domain_closure(double tol) const {
  const Vec p = project_domain(Vec(dimension(), 0.0));
  return norm(p) <= tol;
}

Vec MonotoneOperator::resolvent(double lambda, const Vec& x) const {
  Vec out(x.size());
  resolvent(lambda, std::span<const double>(x), std::span<double>(out));
  return out;
}

Vec MonotoneOperator::project_domain(const Vec& x) const {
  Vec out(x.size());
  project_domain(std::span<const double>(x), std::span<double>(out));
  return out;
}

// ---------------------------------------------------------------------------

ZeroOperator::ZeroOperator(std::size_t d) : d_(d) {
  if (d == 0) throw std::invalid_argument("ZeroOperator: dimension must be positive");
}

void ZeroOperator::resolvent(double, std::span<const double> x, std::span<double> out) const {
  std::copy(x.begin(), x.end(), out.begin());
}

void ZeroOperator::project_domain(std::span<const double> x, std::span<double> out) const {
  std::copy(x.begin(), x.end(), out.begin());
}

bool ZeroOperator::in_graph(std::span<const double>, std::span<const double> y, double tol) const {
  return norm(y) <= tol;
}

GraphPair ZeroOperator::sample_graph(std::mt19937_64& gen) const {
  return {gaussian_vector(d_, gen), Vec(d_, 0.0)};
}

nlohmann::json ZeroOperator::describe() const { return {{"kind", "zero"}}; }

// ---------------------------------------------------------------------------

bool NormalConeOperator::in_graph(std::span<const double> x, std::span<const double> y, double tol) const {
  if (!contains(x, tol * (1.0 + norm(x)))) return false;
  const double s = support(y);
  if (!std::isfinite(s)) return false;
  return s - dot(y, x) <= tol * (1.0 + norm(y) * (1.0 + norm(x)));
}

GraphPair NormalConeOperator::sample_graph(std::mt19937_64& gen) const {
  // z arbitrary, x = P_C(z): then z - x lies in N_C(x), and so does any
  // nonnegative multiple of it.
  const Vec center = sampling_center();
  Vec z = gaussian_vector(dimension(), gen);
  const double scale = sampling_scale();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = center[i] + scale * z[i];
  Vec x = project_domain(z);
  std::uniform_real_distribution<double> t(0.0, 2.0);
  const double factor = t(gen);
  Vec y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = factor * (z[i] - x[i]);
  return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------

BoxNormalCone::BoxNormalCone(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty() || lower_.size() != upper_.size())
    throw std::invalid_argument("box: lower and upper must be non-empty and of equal length");
  for (std::size_t i = 0; i < lower_.size(); ++i)
    if (!(lower_[i] <= upper_[i])) throw std::invalid_argument("box: empty set (lower > upper)");
}

void BoxNormalCone::project_domain(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < lower_.size(); ++i) out[i] = std::clamp(x[i], lower_[i], upper_[i]);
}

std::optional<Vec> BoxNormalCone::interior_point() const {
  Vec c = sampling_center();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (lower_[i] == upper_[i]) return std::nullopt;
  return c;
}

bool BoxNormalCone::contains(std::span<const double> x, double tol) const {
  for (std::size_t i = 0; i < lower_.size(); ++i)
    if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
  return true;
}

double BoxNormalCone::support(std::span<const double> y) const {
  double s = 0.0;
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (y[i] > 0.0) s += y[i] * upper_[i];
    else if (y[i] < 0.0) s += y[i] * lower_[i];
  }
  return s;
}

double BoxNormalCone::sampling_scale() const {
  double w = 1.0;
  for (std::size_t i = 0; i < lower_.size(); ++i)
    if (std::isfinite(lower_[i]) && std::isfinite(upper_[i])) w = std::max(w, upper_[i] - lower_[i]);
  return w;
}

Vec BoxNormalCone::sampling_center() const {
  Vec c(lower_.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const bool lo = std::isfinite(lower_[i]);
    const bool hi = std::isfinite(upper_[i]);
    c[i] = lo && hi ? 0.5 * (lower_[i] + upper_[i]) : lo ? lower_[i] + 0.5 : hi ? upper_[i] - 0.5 : 0.0;
  }
  return c;
}

nlohmann::json BoxNormalCone::describe() const {
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
  for (double v : lower_) lo.push_back(bound_to_json(v));
  for (double v : upper_) hi.push_back(bound_to_json(v));
  return {{"kind", "box"}, {"lower", lo}, {"upper", hi}};
}

// ---------------------------------------------------------------------------

HalfspaceNormalCone::HalfspaceNormalCone(Vec normal, double offset)
    : normal_(std::move(normal)), offset_(offset), norm_sq_(dot(normal_, normal_)) {
  if (normal_.empty() || !(norm_sq_ > 0.0)) throw std::invalid_argument("halfspace: normal must be nonzero");
}

void HalfspaceNormalCone::project_domain(std::span<const double> x, std::span<double> out) const {
  const double excess = dot(normal_, x) - offset_;
  const double t = excess > 0.0 ? excess / norm_sq_ : 0.0;
  for (std::size_t i = 0; i < normal_.size(); ++i) out[i] = x[i] - t * normal_[i];
}

std::optional<Vec> HalfspaceNormalCone::interior_point() const { return sampling_center(); }

bool HalfspaceNormalCone::contains(std::span<const double> x, double tol) const {
  return dot(normal_, x) - offset_ <= tol * std::sqrt(norm_sq_);
}

double HalfspaceNormalCone::support(std::span<const double> y) const {
  const double t = dot(y, normal_) / norm_sq_;
  double off = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) off += (y[i] - t * normal_[i]) * (y[i] - t * normal_[i]);
  const double scale = 1e-10 * (1.0 + norm(y));
  if (std::sqrt(off) > scale || t < -scale) return kInf;
  return std::max(t, 0.0) * offset_;
}

double HalfspaceNormalCone::sampling_scale() const { return 1.0 + std::abs(offset_) / std::sqrt(norm_sq_); }

Vec HalfspaceNormalCone::sampling_center() const {
  // One unit inside the boundary along -normal.
  Vec c(normal_.size());
  const double n = std::sqrt(norm_sq_);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = normal_[i] * (offset_ / norm_sq_) - normal_[i] / n;
  return c;
}

nlohmann::json HalfspaceNormalCone::describe() const {
  return {{"kind", "halfspace"}, {"normal", normal_}, {"offset", offset_}};
}

// ---------------------------------------------------------------------------

BallNormalCone::BallNormalCone(Vec center, double radius) : center_(std::move(center)), radius_(radius) {
  if (center_.empty()) throw std::invalid_argument("ball: center must be non-empty");
  if (!(radius_ >= 0.0)) throw std::invalid_argument("ball: radius must be nonnegative");
}

void BallNormalCone::project_domain(std::span<const double> x, std::span<double> out) const {
  double dist_sq = 0.0;
  for (std::size_t i = 0; i < center_.size(); ++i) dist_sq += (x[i] - center_[i]) * (x[i] - center_[i]);
  const double dist = std::sqrt(dist_sq);
  if (dist <= radius_) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  const double s = radius_ / dist;
  for (std::size_t i = 0; i < center_.size(); ++i) out[i] = center_[i] + s * (x[i] - center_[i]);
}

bool BallNormalCone::contains(std::span<const double> x, double tol) const {
  double dist_sq = 0.0;
  for (std::size_t i = 0; i < center_.size(); ++i) dist_sq += (x[i] - center_[i]) * (x[i] - center_[i]);
  return std::sqrt(dist_sq) <= radius_ + tol;
}

double BallNormalCone::support(std::span<const double> y) const { return dot(y, center_) + radius_ * norm(y); }

nlohmann::json BallNormalCone::describe() const {
  return {{"kind", "ball"}, {"center", center_}, {"radius", radius_}};
}

// ---------------------------------------------------------------------------

Subdifferential1D::Subdifferential1D(double lower, double upper, Vec breakpoints, Vec slopes, Vec offsets)
    : lower_(lower), upper_(upper), breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)),
      offsets_(std::move(offsets)) {
  if (!(lower_ <= upper_)) throw std::invalid_argument("subdiff1d: empty domain (lower > upper)");
  if (slopes_.size() != breakpoints_.size() + 1 || offsets_.size() != slopes_.size())
    throw std::invalid_argument("subdiff1d: need len(slopes) = len(offsets) = len(breakpoints) + 1");
  for (double q : slopes_)
    if (!(q >= 0.0)) throw std::invalid_argument("subdiff1d: slopes must be nonnegative (convexity)");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    const double b = breakpoints_[i];
    if (!(b > lower_ && b < upper_)) throw std::invalid_argument("subdiff1d: breakpoints must lie inside (lower, upper)");
    if (i > 0 && !(b > breakpoints_[i - 1])) throw std::invalid_argument("subdiff1d: breakpoints must increase");
    const double left = slopes_[i] * b + offsets_[i];
    const double right = slopes_[i + 1] * b + offsets_[i + 1];
    if (left > right + 1e-12 * (1.0 + std::abs(left)))
      throw std::invalid_argument("subdiff1d: derivative decreases at a breakpoint (phi not convex)");
  }
}

Subdifferential1D Subdifferential1D::half_square() { return Subdifferential1D(-kInf, kInf, {}, {1.0}, {0.0}); }

double Subdifferential1D::piece_left(std::size_t i) const { return i == 0 ? lower_ : breakpoints_[i - 1]; }
double Subdifferential1D::piece_right(std::size_t i) const {
  return i == breakpoints_.size() ? upper_ : breakpoints_[i];
}

std::size_t Subdifferential1D::piece_of(double x) const {
  return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                                  breakpoints_.begin());
}

std::pair<double, double> Subdifferential1D::subgradient_range(double x) const {
  if (x < lower_ || x > upper_) return {kInf, -kInf};  // empty
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < slopes_.size(); ++i) {
    if (x < piece_left(i) || x > piece_right(i)) continue;
    const double v = slopes_[i] * x + offsets_[i];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (x == lower_ && std::isfinite(lower_)) lo = -kInf;
  if (x == upper_ && std::isfinite(upper_)) hi = kInf;
  return {lo, hi};
}

double Subdifferential1D::resolvent_scalar(double lambda, double x) const {
  // y + lambda * dphi(y) is strictly increasing; the unique solution lies
  // either inside a piece or at a kink / interval end.
  for (std::size_t i = 0; i < slopes_.size(); ++i) {
    const double y = (x - lambda * offsets_[i]) / (1.0 + lambda * slopes_[i]);
    if (y >= piece_left(i) && y <= piece_right(i)) return y;
  }
  auto at_kink = [&](double p) {
    const auto [lo, hi] = subgradient_range(p);
    return x >= p + lambda * lo && x <= p + lambda * hi;
  };
  if (std::isfinite(lower_) && at_kink(lower_)) return lower_;
  for (double b : breakpoints_)
    if (at_kink(b)) return b;
  if (std::isfinite(upper_) && at_kink(upper_)) return upper_;
  // Only reachable through rounding right at a kink: fall back to the
  // nearest candidate after clamping.
  const double y0 = std::clamp(x, lower_, upper_);
  const std::size_t i = std::min(piece_of(y0), slopes_.size() - 1);
  return std::clamp((x - lambda * offsets_[i]) / (1.0 + lambda * slopes_[i]), piece_left(i), piece_right(i));
}

void Subdifferential1D::resolvent(double lambda, std::span<const double> x, std::span<double> out) const {
  out[0] = resolvent_scalar(lambda, x[0]);
}

void Subdifferential1D::project_domain(std::span<const double> x, std::span<double> out) const {
  out[0] = std::clamp(x[0], lower_, upper_);
}

bool Subdifferential1D::in_graph(std::span<const double> x, std::span<const double> y, double tol) const {
  const double xv = x[0];
  const double slack = tol * (1.0 + std::abs(xv));
  if (xv < lower_ - slack || xv > upper_ + slack) return false;
  // Union of derivative ranges over every point within `slack` of x, so a
  // point that rounds to either side of a kink is still judged correctly.
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < slopes_.size(); ++i) {
    if (xv < piece_left(i) - slack || xv > piece_right(i) + slack) continue;
    const double xc = std::clamp(xv, piece_left(i), piece_right(i));
    const double v = slopes_[i] * xc + offsets_[i];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (std::isfinite(lower_) && std::abs(xv - lower_) <= slack) lo = -kInf;
  if (std::isfinite(upper_) && std::abs(xv - upper_) <= slack) hi = kInf;
  const double yv = y[0];
  const double ytol = tol * (1.0 + std::abs(yv));
  return yv >= lo - ytol && yv <= hi + ytol;
}

GraphPair Subdifferential1D::sample_graph(std::mt19937_64& gen) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> tail(1.0);
  Vec kinks;
  if (std::isfinite(lower_)) kinks.push_back(lower_);
  kinks.insert(kinks.end(), breakpoints_.begin(), breakpoints_.end());
  if (std::isfinite(upper_)) kinks.push_back(upper_);

  double x;
  if (!kinks.empty() && unit(gen) < 0.35) {
    x = kinks[std::uniform_int_distribution<std::size_t>(0, kinks.size() - 1)(gen)];
  } else {
    const double lo = std::isfinite(lower_) ? lower_ : (std::isfinite(upper_) ? upper_ - 4.0 : -4.0);
    const double hi = std::isfinite(upper_) ? upper_ : lo + 8.0;
    x = lo + (hi - lo) * unit(gen);
  }
  auto [ylo, yhi] = subgradient_range(x);
  if (!std::isfinite(ylo)) ylo = yhi - 3.0 * tail(gen);
  if (!std::isfinite(yhi)) yhi = ylo + 3.0 * tail(gen);
  const double y = ylo + (yhi - ylo) * unit(gen);
  return {{x}, {y}};
}

std::optional<Vec> Subdifferential1D::interior_point() const {
  if (lower_ == upper_) return std::nullopt;
  if (std::isfinite(lower_) && std::isfinite(upper_)) return Vec{0.5 * (lower_ + upper_)};
  if (std::isfinite(lower_)) return Vec{lower_ + 1.0};
  if (std::isfinite(upper_)) return Vec{upper_ - 1.0};
  return Vec{0.0};
}

nlohmann::json Subdifferential1D::describe() const {
  return {{"kind", "subdiff1d"}, {"lower", bound_to_json(lower_)}, {"upper", bound_to_json(upper_)},
          {"breakpoints", breakpoints_}, {"slopes", slopes_}, {"offsets", offsets_}};
}

// ---------------------------------------------------------------------------

ProductOperator::ProductOperator(std::vector<OperatorPtr> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("product: needs at least one factor");
  for (const auto& f : factors_)
    if (!f || f->dimension() != 1) throw std::invalid_argument("product: every factor must be one-dimensional");
}

void ProductOperator::resolvent(double lambda, std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < factors_.size(); ++i) factors_[i]->resolvent(lambda, x.subspan(i, 1), out.subspan(i, 1));
}

void ProductOperator::project_domain(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < factors_.size(); ++i) factors_[i]->project_domain(x.subspan(i, 1), out.subspan(i, 1));
}

bool ProductOperator::in_graph(std::span<const double> x, std::span<const double> y, double tol) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (!factors_[i]->in_graph(x.subspan(i, 1), y.subspan(i, 1), tol)) return false;
  return true;
}

bool ProductOperator::has_graph_sampler() const {
  return std::all_of(factors_.begin(), factors_.end(), [](const auto& f) { return f->has_graph_sampler(); });
}

GraphPair ProductOperator::sample_graph(std::mt19937_64& gen) const {
  GraphPair p;
  for (const auto& f : factors_) {
    auto g = f->sample_graph(gen);
    p.x.push_back(g.x[0]);
    p.y.push_back(g.y[0]);
  }
  return p;
}

std::optional<Vec> ProductOperator::interior_point() const {
  Vec out;
  for (const auto& f : factors_) {
    auto p = f->interior_point();
    if (!p) return std::nullopt;
    out.push_back((*p)[0]);
  }
  return out;
}

nlohmann::json ProductOperator::describe() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : factors_) list.push_back(f->describe());
  return {{"kind", "product"}, {"factors", list}};
}

// ---------------------------------------------------------------------------

void resolvent_step_into(const MonotoneOperator& op, double lambda, std::span<const double> pre,
                         std::span<double> x_new, std::span<double> dk) {
  op.resolvent(lambda, pre, x_new);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (!std::isfinite(x_new[i]))
      throw OperatorFailure("resolvent returned a non-finite point", lambda, Vec(pre.begin(), pre.end()));
    dk[i] = pre[i] - x_new[i];
  }
}

ResolventStep resolvent_step(const MonotoneOperator& op, double lambda, std::span<const double> x) {
  if (!(lambda > 0.0)) throw std::invalid_argument("resolvent_step: lambda must be positive");
  if (x.size() != op.dimension()) throw std::invalid_argument("resolvent_step: dimension mismatch");
  ResolventStep s{Vec(x.size()), Vec(x.size())};
  resolvent_step_into(op, lambda, x, s.x_new, s.dk);
  return s;
}

MonotoneReport check_monotone(const MonotoneOperator& op, std::size_t n_samples, std::uint64_t rng_seed) {
  if (!op.has_graph_sampler()) throw UnsupportedCheck("check_monotone: operator has no graph sampler");
  std::mt19937_64 gen(rng_seed);
  std::vector<GraphPair> pairs;
  pairs.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) pairs.push_back(op.sample_graph(gen));

  MonotoneReport report;
  report.min_pairing = kInf;
  const std::size_t d = op.dimension();
  Vec dx(d), dy(d);
  // Pair each sample with its successor and with a random partner.
  std::uniform_int_distribution<std::size_t> pick(0, n_samples - 1);
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t j : {(i + 1) % n_samples, pick(gen)}) {
      if (i == j) continue;
      for (std::size_t c = 0; c < d; ++c) {
        dx[c] = pairs[i].x[c] - pairs[j].x[c];
        dy[c] = pairs[i].y[c] - pairs[j].y[c];
      }
      const double pairing = dot(dx, dy);
      report.min_pairing = std::min(report.min_pairing, pairing);
      ++report.samples;
      if (pairing < -(kGraphTolerance + kGraphTolerance * norm(dx) * norm(dy))) report.violated = true;
    }
  }
  if (report.samples == 0) report.min_pairing = 0.0;
  return report;
}

OperatorPtr operator_from_json(const nlohmann::json& spec, std::size_t d) {
  if (!spec.is_object() || !spec.contains("kind")) throw std::invalid_argument("operator: missing required key 'kind'");
  const auto kind = spec.at("kind").get<std::string>();
  if (kind == "zero") {
    require_keys(spec, {}, {});
    return std::make_shared<ZeroOperator>(d);
  }
  if (kind == "box") {
    require_keys(spec, {}, {"lower", "upper"});
    Vec lo = spec.contains("lower") ? json_bounds(spec["lower"], d, -kInf) : Vec(d, -kInf);
    Vec hi = spec.contains("upper") ? json_bounds(spec["upper"], d, kInf) : Vec(d, kInf);
    return std::make_shared<BoxNormalCone>(std::move(lo), std::move(hi));
  }
  if (kind == "halfspace") {
    require_keys(spec, {"normal"}, {"offset"});
    return std::make_shared<HalfspaceNormalCone>(json_vector(spec["normal"], d, "normal"),
                                                 spec.value("offset", 0.0));
  }
  if (kind == "ball") {
    require_keys(spec, {"radius"}, {"center"});
    Vec c = spec.contains("center") ? json_vector(spec["center"], d, "center") : Vec(d, 0.0);
    return std::make_shared<BallNormalCone>(std::move(c), spec["radius"].get<double>());
  }
  if (kind == "subdiff1d") {
    require_keys(spec, {}, {"lower", "upper", "breakpoints", "slopes", "offsets"});
    if (d != 1) throw std::invalid_argument("operator: subdiff1d requires dimension 1 (use product for d > 1)");
    return std::make_shared<Subdifferential1D>(
        spec.contains("lower") ? json_bound(spec["lower"], -kInf) : -kInf,
        spec.contains("upper") ? json_bound(spec["upper"], kInf) : kInf, spec.value("breakpoints", Vec{}),
        spec.value("slopes", Vec{1.0}), spec.value("offsets", Vec{0.0}));
  }
  if (kind == "product") {
    require_keys(spec, {"factors"}, {});
    const auto& list = spec["factors"];
    if (!list.is_array() || list.size() != d)
      throw std::invalid_argument("operator: product needs exactly " + std::to_string(d) + " factors");
    std::vector<OperatorPtr> factors;
    for (const auto& f : list) factors.push_back(operator_from_json(f, 1));
    return std::make_shared<ProductOperator>(std::move(factors));
  }
  throw std::invalid_argument("operator: unknown kind '" + kind + "'");
}

}  // namespace mvsde
