#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mvsde/errors.hpp"
#include "mvsde/monotone_ops.hpp"

using namespace mvsde;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec random_point(std::size_t d, double scale, std::mt19937_64& gen) {
  std::normal_distribution<double> n01;
  Vec v(d);
  for (auto& x : v) x = scale * n01(gen);
  return v;
}

std::vector<OperatorPtr> built_ins() {
  auto piecewise = std::make_shared<Subdifferential1D>(-2.0, 3.0, Vec{0.0, 1.0}, Vec{0.5, 0.0, 2.0}, Vec{-1.0, 0.0, -1.5});
  return {
      std::make_shared<ZeroOperator>(3),
      std::make_shared<BoxNormalCone>(Vec{0.0, -1.0, -kInf}, Vec{kInf, 1.0, 2.0}),
      std::make_shared<HalfspaceNormalCone>(Vec{1.0, -2.0, 0.5}, 0.3),
      std::make_shared<BallNormalCone>(Vec{0.5, 0.0, -1.0}, 1.5),
      std::make_shared<Subdifferential1D>(Subdifferential1D::half_square()),
      piecewise,
      std::make_shared<ProductOperator>(std::vector<OperatorPtr>{
          piecewise, std::make_shared<BoxNormalCone>(Vec{0.0}, Vec{kInf}), std::make_shared<ZeroOperator>(1)}),
  };
}

/// y = -x: the simplest anti-monotone graph.
class AntiMonotone final : public MonotoneOperator {
 public:
  std::size_t dimension() const override { return 2; }
  void resolvent(double lambda, std::span<const double> x, std::span<double> out) const override {
    for (std::size_t i = 0; i < 2; ++i) out[i] = x[i] / (1.0 - lambda);
  }
  void project_domain(std::span<const double> x, std::span<double> out) const override {
    std::copy(x.begin(), x.end(), out.begin());
  }
  bool has_graph_sampler() const override { return true; }
  GraphPair sample_graph(std::mt19937_64& gen) const override {
    Vec x = random_point(2, 1.0, gen);
    return {x, {-x[0], -x[1]}};
  }
  nlohmann::json describe() const override { return {{"kind", "anti"}}; }
};

}  // namespace

TEST_CASE("resolvent_step examples") {
  SUBCASE("normal cone of [0, inf) projects a negative point") {
    BoxNormalCone op({0.0}, {kInf});
    const auto s = resolvent_step(op, 0.1, Vec{-1.0});
    CHECK(s.x_new[0] == 0.0);
    CHECK(s.dk[0] == -1.0);
  }
  SUBCASE("zero operator is the identity") {
    ZeroOperator op(1);
    const auto s = resolvent_step(op, 0.37, Vec{3.7});
    CHECK(s.x_new[0] == 3.7);
    CHECK(s.dk[0] == 0.0);
  }
  SUBCASE("half square: x_new + lambda x_new = x") {
    const auto op = Subdifferential1D::half_square();
    const auto s = resolvent_step(op, 1.0, Vec{2.0});
    CHECK(s.x_new[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.dk[0] == doctest::Approx(1.0).epsilon(1e-15));
    for (double lambda : {0.01, 0.5, 3.0})
      for (double x : {-4.0, 0.0, 2.5}) CHECK(op.resolvent_scalar(lambda, x) == doctest::Approx(x / (1.0 + lambda)));
  }
  SUBCASE("lambda must be positive") {
    ZeroOperator op(1);
    CHECK_THROWS_AS(resolvent_step(op, 0.0, Vec{1.0}), std::invalid_argument);
  }
}

TEST_CASE("user operator returning NaN raises operator failure with its inputs") {
  class Broken final : public MonotoneOperator {
   public:
    std::size_t dimension() const override { return 1; }
    void resolvent(double, std::span<const double>, std::span<double> out) const override { out[0] = std::nan(""); }
    void project_domain(std::span<const double> x, std::span<double> out) const override { out[0] = x[0]; }
    nlohmann::json describe() const override { return {{"kind", "broken"}}; }
  } op;
  try {
    resolvent_step(op, 0.25, Vec{1.5});
    FAIL("expected OperatorFailure");
  } catch (const OperatorFailure& e) {
    CHECK(e.lambda() == 0.25);
    CHECK(e.point() == Vec{1.5});
  }
}

TEST_CASE("check_monotone") {
  SUBCASE("zero operator pairs are exactly zero") {
    const auto r = check_monotone(ZeroOperator(2), 100, 1);
    CHECK(r.min_pairing == 0.0);
    CHECK_FALSE(r.violated);
  }
  SUBCASE("ball normal cone") {
    const auto r = check_monotone(BallNormalCone({0.0, 0.0, 0.0}, 1.0), 1000, 2);
    CHECK(r.min_pairing >= -1e-12);
    CHECK_FALSE(r.violated);
  }
  SUBCASE("anti-monotone counterexample is flagged") {
    const auto r = check_monotone(AntiMonotone(), 200, 3);
    CHECK(r.min_pairing < 0.0);
    CHECK(r.violated);
  }
  SUBCASE("every built-in passes") {
    for (const auto& op : built_ins()) {
      const auto r = check_monotone(*op, 1000, 4);
      CHECK_FALSE(r.violated);
      CHECK(r.min_pairing >= -1e-10);
    }
  }
  SUBCASE("missing sampler is an unsupported check") {
    class NoSampler final : public MonotoneOperator {
     public:
      std::size_t dimension() const override { return 1; }
      void resolvent(double, std::span<const double> x, std::span<double> out) const override { out[0] = x[0]; }
      void project_domain(std::span<const double> x, std::span<double> out) const override { out[0] = x[0]; }
      nlohmann::json describe() const override { return {}; }
    } op;
    CHECK_THROWS_AS(check_monotone(op, 10, 0), UnsupportedCheck);
  }
}

TEST_CASE("resolvent properties over random inputs") {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> log_lambda(-3.0, 1.0);
  for (const auto& op : built_ins()) {
    const std::size_t d = op->dimension();
    CAPTURE(op->describe().dump());
    std::size_t nonexpansive_violations = 0, yosida_failures = 0, domain_failures = 0, pairing_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const double lambda = std::pow(10.0, log_lambda(gen));
      const Vec x = random_point(d, 3.0, gen), y = random_point(d, 3.0, gen);
      const Vec jx = op->resolvent(lambda, x), jy = op->resolvent(lambda, y);
      if (dist(jx, jy) > dist(x, y) + 1e-12) ++nonexpansive_violations;
      if (dist(op->project_domain(jx), jx) > 1e-12) ++domain_failures;

      Vec yosida(d);
      for (std::size_t i = 0; i < d; ++i) yosida[i] = (x[i] - jx[i]) / lambda;
      if (!op->in_graph(jx, yosida, kGraphTolerance)) ++yosida_failures;

      // <x_new - a, dk - lambda y> >= 0 for any graph pair (a, y).
      const auto pair = op->sample_graph(gen);
      const auto step = resolvent_step(*op, lambda, x);
      Vec lhs(d), rhs(d);
      for (std::size_t i = 0; i < d; ++i) {
        lhs[i] = step.x_new[i] - pair.x[i];
        rhs[i] = step.dk[i] - lambda * pair.y[i];
      }
      if (dot(lhs, rhs) < -1e-10 * (1.0 + dot(x, x))) ++pairing_failures;
    }
    CHECK(nonexpansive_violations == 0);
    CHECK(domain_failures == 0);
    CHECK(yosida_failures == 0);
    CHECK(pairing_failures == 0);
  }
}

TEST_CASE("normal cone resolvent is the projection for every lambda") {
  std::mt19937_64 gen(5);
  const std::vector<OperatorPtr> cones{built_ins()[1], built_ins()[2], built_ins()[3]};
  for (const auto& op : cones)
    for (int trial = 0; trial < 200; ++trial) {
      const Vec x = random_point(3, 4.0, gen);
      const Vec a = op->resolvent(1e-3, x), b = op->resolvent(7.0, x), p = op->project_domain(x);
      CHECK(a == b);
      CHECK(a == p);
    }
}

TEST_CASE("product operator acts coordinatewise exactly") {
  const auto ops = built_ins();
  const auto& product = *ops.back();
  const auto& first = *ops[5];
  BoxNormalCone half({0.0}, {kInf});
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = random_point(3, 3.0, gen);
    const Vec r = product.resolvent(0.3, x);
    CHECK(r[0] == first.resolvent(0.3, Vec{x[0]})[0]);
    CHECK(r[1] == half.resolvent(0.3, Vec{x[1]})[0]);
    CHECK(r[2] == x[2]);
  }
}

TEST_CASE("subdifferential with kinks and interval ends") {
  // phi' = 0.5 x - 1 on [-2, 0), 0 on [0, 1), 2 x - 1.5 on [1, 3]; jumps at 0 and 1.
  Subdifferential1D op(-2.0, 3.0, {0.0, 1.0}, {0.5, 0.0, 2.0}, {-1.0, 0.0, -1.5});
  SUBCASE("solution parked at a kink") {
    // At 0 the subdifferential is [-1, 0]; x in [0 - lambda, 0] maps to 0.
    CHECK(op.resolvent_scalar(1.0, -0.5) == 0.0);
  }
  SUBCASE("interval ends absorb") {
    CHECK(op.resolvent_scalar(0.1, -100.0) == -2.0);
    CHECK(op.resolvent_scalar(0.1, 100.0) == 3.0);
  }
  SUBCASE("interior piece") {
    // On [1, 3]: y + 0.1 (2y - 1.5) = 2  ->  y = 2.15 / 1.2
    CHECK(op.resolvent_scalar(0.1, 2.0) == doctest::Approx(2.15 / 1.2));
  }
  SUBCASE("non-convex data is rejected") {
    CHECK_THROWS_AS(Subdifferential1D(-1.0, 1.0, {0.0}, {0.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Subdifferential1D(-1.0, 1.0, {}, {-1.0}, {0.0}), std::invalid_argument);
  }
}

TEST_CASE("rest-point and domain predicates") {
  CHECK(BoxNormalCone({0.0}, {kInf}).zero_is_rest_point());
  CHECK_FALSE(BoxNormalCone({1.0}, {kInf}).zero_in_domain_closure());
  CHECK(Subdifferential1D::half_square().zero_is_rest_point());
  // phi' = x + 1 has 0 in the domain but A(0) = {1}.
  CHECK_FALSE(Subdifferential1D(-kInf, kInf, {}, {1.0}, {1.0}).zero_is_rest_point());
}

TEST_CASE("operators from tagged records") {
  const auto box = operator_from_json(nlohmann::json::parse(R"({"kind": "box", "lower": [0], "upper": ["inf"]})"), 1);
  CHECK(box->resolvent(0.1, Vec{-2.0})[0] == 0.0);
  const auto ball = operator_from_json(nlohmann::json::parse(R"({"kind": "ball", "radius": 2})"), 2);
  CHECK(dist(ball->resolvent(1.0, Vec{3.0, 4.0}), Vec{1.2, 1.6}) < 1e-15);
  const auto product = operator_from_json(
      nlohmann::json::parse(R"({"kind": "product", "factors": [{"kind": "zero"}, {"kind": "subdiff1d"}]})"), 2);
  CHECK(product->resolvent(1.0, Vec{2.0, 2.0}) == Vec{2.0, 1.0});
  const auto half = operator_from_json(nlohmann::json::parse(R"({"kind": "halfspace", "normal": [0, 1], "offset": 1})"), 2);
  CHECK(half->resolvent(1.0, Vec{5.0, 3.0}) == Vec{5.0, 1.0});
  // Round trip through describe().
  const auto again = operator_from_json(box->describe(), 1);
  CHECK(again->describe() == box->describe());

  CHECK_THROWS_WITH_AS(operator_from_json(nlohmann::json::parse(R"({"kind": "box", "lowr": [0]})"), 1),
                       doctest::Contains("lowr"), std::invalid_argument);
  CHECK_THROWS_AS(operator_from_json(nlohmann::json::parse(R"({"kind": "cone"})"), 1), std::invalid_argument);
  CHECK_THROWS_AS(operator_from_json(nlohmann::json::parse(R"({"kind": "subdiff1d"})"), 2), std::invalid_argument);
}
