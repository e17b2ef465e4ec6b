#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mvsde/coefficients.hpp"
#include "mvsde/errors.hpp"

using namespace mvsde;

namespace {

SegmentBuffer constant_segment(double value, std::size_t nodes, std::size_t d = 1, double h = 0.1) {
  return {Vec(nodes * d, value), d, h};
}

SegmentBuffer random_segment(std::mt19937_64& gen, std::size_t nodes, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> n01;
  SegmentBuffer b{Vec(nodes * d), d, 0.1};
  for (auto& v : b.values) v = scale * n01(gen);
  return b;
}

std::shared_ptr<Example5Coefficients> linear_readout(double c1, double alpha = 0.0, double beta = 0.0) {
  Example5Params p;
  p.f.c1 = c1;
  p.alpha = alpha;
  p.beta = beta;
  return std::make_shared<Example5Coefficients>(p, 1);
}

std::shared_ptr<Example5Coefficients> tanh_family(std::size_t d) {
  Example5Params p;
  p.f = {Nonlinearity::tanh, 0.3, -1.2, 0.7, 0.5};
  p.g = {Nonlinearity::tanh, 0.4, 0.6, -0.2, 0.3};
  p.alpha = 0.8;
  p.beta = -0.1;
  return std::make_shared<Example5Coefficients>(p, d);
}

/// Wraps a family so that only the finite-difference providers are available.
class WithoutClosedForms final : public CoefficientSet {
 public:
  explicit WithoutClosedForms(CoefficientsPtr inner) : inner_(std::move(inner)) {}
  std::size_t state_dim() const override { return inner_->state_dim(); }
  std::size_t noise_dim() const override { return inner_->noise_dim(); }
  std::unique_ptr<BoundCoefficients> bind(const EmpiricalMeasure& mu) const override { return inner_->bind(mu); }

 private:
  CoefficientsPtr inner_;
};

Vec combine(double a, const Vec& x, const Vec& y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + y[i];
  return out;
}

}  // namespace

TEST_CASE("eval_b examples") {
  const auto zeta = constant_segment(0.0, 11);
  const auto mu = EmpiricalMeasure::dirac(zeta.view());
  SUBCASE("linear read-out of zeta(0)") {
    auto z = constant_segment(0.0, 11);
    z.values.back() = 2.0;
    CHECK(eval_b(*linear_readout(1.0), z.view(), mu)[0] == 2.0);
  }
  SUBCASE("trapezoid mean of a constant") {
    Example5Params p;
    p.f.c3 = 1.7;
    const auto three = constant_segment(3.0, 11);
    CHECK(eval_b(Example5Coefficients(p, 1), three.view(), mu)[0] == doctest::Approx(3.0 * 1.7).epsilon(1e-15));
  }
  SUBCASE("tanh at zero") {
    Example5Params p;
    p.f = {Nonlinearity::tanh, 0.0, 1.0, 0.0, 0.0};
    CHECK(eval_b(Example5Coefficients(p, 1), zeta.view(), mu)[0] == 0.0);
  }
  SUBCASE("non-finite output") {
    CallableCoefficients bad(1, 1, [](const Segment&, const EmpiricalMeasure&, std::span<double> out) { out[0] = NAN; },
                             [](const Segment&, const EmpiricalMeasure&, std::span<double> out) { out[0] = 1.0; });
    CHECK_THROWS_AS(eval_b(bad, zeta.view(), mu), CoefficientEvaluationError);
    CHECK(eval_sigma(bad, zeta.view(), mu)[0] == 1.0);
  }
  SUBCASE("measure coupling through the atom mean") {
    const auto a = constant_segment(1.0, 11), b = constant_segment(3.0, 11);
    const EmpiricalMeasure nu({a.view(), b.view()});
    // f = zeta(0) + alpha * mean atom(0) + beta
    CHECK(eval_b(*linear_readout(1.0, 0.5, 0.25), zeta.view(), nu)[0] == doctest::Approx(0.5 * 2.0 + 0.25));
  }
  SUBCASE("deterministic") {
    std::mt19937_64 gen(1);
    const auto z = random_segment(gen, 11, 2);
    const auto fam = tanh_family(2);
    const auto m = EmpiricalMeasure::dirac(z.view());
    CHECK(eval_b(*fam, z.view(), m) == eval_b(*fam, z.view(), m));
    const auto s = eval_sigma(*fam, z.view(), m);
    CHECK(s.size() == 4);
    CHECK(s[1] == 0.0);
    CHECK(s[2] == 0.0);
  }
}

TEST_CASE("frechet pairing") {
  std::mt19937_64 gen(2);
  const auto zero = constant_segment(0.0, 11);
  const auto mu = EmpiricalMeasure::dirac(zero.view());
  SUBCASE("linear is exact") {
    const auto v = random_segment(gen, 11, 1);
    const auto fam = linear_readout(2.5);
    CHECK(frechet_pairing(*fam, zero.view(), mu, v.view())[0] == 2.5 * v.values.back());
    CHECK(frechet_pairing(*fam, zero.view(), mu, zero.view())[0] == 0.0);
  }
  SUBCASE("tanh at zero has unit slope") {
    Example5Params p;
    p.f = {Nonlinearity::tanh, 0.0, 1.0, 0.0, 0.0};
    const auto fam = std::make_shared<Example5Coefficients>(p, 1);
    auto v = constant_segment(0.0, 11);
    v.values.back() = 1.0;
    CHECK(frechet_pairing(*fam, zero.view(), mu, v.view())[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(frechet_pairing_fd(*fam, zero.view(), mu, v.view())[0] - 1.0) < 1e-8);
    CHECK(std::abs(frechet_pairing(WithoutClosedForms(fam), zero.view(), mu, v.view())[0] - 1.0) < 1e-8);
  }
  SUBCASE("linear in the direction") {
    const auto fam = tanh_family(2);
    const WithoutClosedForms fd(fam);
    for (int trial = 0; trial < 50; ++trial) {
      const auto z = random_segment(gen, 11, 2), v1 = random_segment(gen, 11, 2), v2 = random_segment(gen, 11, 2);
      const auto atom = random_segment(gen, 11, 2);
      const auto m = EmpiricalMeasure::dirac(atom.view());
      const double a = std::normal_distribution<double>()(gen);
      SegmentBuffer mix{combine(a, v1.values, v2.values), 2, 0.1};
      for (const CoefficientSet* c : {static_cast<const CoefficientSet*>(fam.get()), static_cast<const CoefficientSet*>(&fd)}) {
        const double tol = c == &fd ? 1e-5 : 1e-8;
        const auto lhs = frechet_pairing(*c, z.view(), m, mix.view());
        const auto rhs = combine(a, frechet_pairing(*c, z.view(), m, v1.view()), frechet_pairing(*c, z.view(), m, v2.view()));
        for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(lhs[i] - rhs[i]) < tol);
      }
      const auto closed = frechet_pairing(*fam, z.view(), m, v1.view());
      const auto diff = frechet_pairing_fd(*fam, z.view(), m, v1.view());
      for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(closed[i] - diff[i]) < 1e-7);
    }
  }
}

TEST_CASE("lions pairing") {
  std::mt19937_64 gen(3);
  SUBCASE("zero directions") {
    const auto fam = tanh_family(1);
    const auto z = random_segment(gen, 11, 1), a = random_segment(gen, 11, 1), zero = constant_segment(0.0, 11);
    const auto atoms = EmpiricalMeasure::dirac(a.view());
    std::vector<Segment> dirs{zero.view()};
    CHECK(lions_pairing(*fam, z.view(), atoms, dirs)[0] == 0.0);
    CHECK(lions_pairing_fd(*fam, z.view(), atoms, dirs)[0] == 0.0);
  }
  SUBCASE("linear family: functional of alpha times the mean direction") {
    Example5Params p;
    p.f = {Nonlinearity::identity, 0.1, 1.5, -0.5, 2.0};
    p.alpha = 0.7;
    const Example5Coefficients fam(p, 1);
    std::vector<SegmentBuffer> atom_buf, dir_buf;
    for (int i = 0; i < 4; ++i) {
      atom_buf.push_back(random_segment(gen, 11, 1));
      dir_buf.push_back(random_segment(gen, 11, 1));
    }
    std::vector<Segment> atoms, dirs;
    for (int i = 0; i < 4; ++i) {
      atoms.push_back(atom_buf[i].view());
      dirs.push_back(dir_buf[i].view());
    }
    SegmentBuffer mean_dir{Vec(11, 0.0), 1, 0.1};
    for (const auto& d : dir_buf)
      for (std::size_t j = 0; j < 11; ++j) mean_dir.values[j] += d.values[j] / 4.0;
    const double expected = 0.7 * p.f.linear_part(mean_dir.view(), 0);
    const auto z = random_segment(gen, 11, 1);
    CHECK(lions_pairing(fam, z.view(), EmpiricalMeasure(atoms), dirs)[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(lions_pairing_fd(fam, z.view(), EmpiricalMeasure(atoms), dirs)[0] - expected) < 1e-8);
  }
  SUBCASE("closed form and push-forward difference agree") {
    for (std::size_t d : {1u, 2u})
      for (std::size_t p = 1; p <= 8; ++p) {
        const auto fam = tanh_family(d);
        std::vector<SegmentBuffer> atom_buf, dir_buf;
        for (std::size_t i = 0; i < p; ++i) {
          atom_buf.push_back(random_segment(gen, 11, d));
          dir_buf.push_back(random_segment(gen, 11, d));
        }
        std::vector<Segment> atoms, dirs;
        for (std::size_t i = 0; i < p; ++i) {
          atoms.push_back(atom_buf[i].view());
          dirs.push_back(dir_buf[i].view());
        }
        const auto z = random_segment(gen, 11, d);
        const auto closed = lions_pairing(*fam, z.view(), EmpiricalMeasure(atoms), dirs);
        const auto diff = lions_pairing_fd(*fam, z.view(), EmpiricalMeasure(atoms), dirs);
        for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(closed[i] - diff[i]) < 1e-6);
      }
  }
  SUBCASE("length mismatch") {
    const auto fam = tanh_family(1);
    const auto a = random_segment(gen, 11, 1);
    std::vector<Segment> dirs{a.view(), a.view()};
    CHECK_THROWS_AS(lions_pairing(*fam, a.view(), EmpiricalMeasure::dirac(a.view()), dirs), std::invalid_argument);
  }
}

TEST_CASE("growth checker") {
  const auto zero_field = [](const Segment&, const EmpiricalMeasure&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  SUBCASE("zero coefficients") {
    CallableCoefficients c(1, 1, zero_field, zero_field);
    CHECK(check_growth(c, 200, 1).estimate == 0.0);
  }
  SUBCASE("present value read-out") {
    const auto r = check_growth(*linear_readout(1.0), 1000, 2);
    CHECK(r.estimate <= 1.0);
    CHECK(r.estimate > 0.0);
    CHECK_FALSE(r.unbounded);
  }
  SUBCASE("exponential growth is flagged") {
    CallableCoefficients c(
        1, 1, [](const Segment& z, const EmpiricalMeasure&, std::span<double> out) { out[0] = std::exp(z.present()[0]); },
        zero_field);
    CHECK(check_growth(c, 500, 3).unbounded);
  }
  SUBCASE("tanh family is bounded") {
    const auto r = check_growth(*tanh_family(2), 500, 4);
    CHECK(std::isfinite(r.estimate));
    CHECK_FALSE(r.unbounded);
  }
}

TEST_CASE("Lipschitz checker") {
  SUBCASE("constant drift") {
    Example5Params p;
    p.f.c0 = 3.0;
    p.g.c0 = 1.0;
    CHECK(check_lipschitz(Example5Coefficients(p, 1), 300, 1).estimate == 0.0);
  }
  SUBCASE("read-out bounded by C1 squared") {
    const auto r = check_lipschitz(*linear_readout(1.5), 1000, 2);
    CHECK(r.estimate <= 1.5 * 1.5 + 1e-12);
    CHECK(r.estimate > 0.5);
  }
  SUBCASE("tanh family stabilizes") {
    const auto a = check_lipschitz(*tanh_family(1), 500, 3);
    const auto b = check_lipschitz(*tanh_family(1), 1000, 3);
    CHECK(std::isfinite(a.estimate));
    CHECK(b.estimate >= a.estimate * 0.999);
    CHECK(b.estimate <= a.estimate * 1.5);
  }
}

TEST_CASE("family from tagged record") {
  const auto spec = nlohmann::json::parse(R"({
    "kind": "example5",
    "f": {"s": "tanh", "c0": 0.1, "C1": -1.0, "C2": 0.5, "C3": 0.0},
    "g": {"s": "identity", "c0": 0.2},
    "phi": {"alpha": 0.3, "beta": 0.0}})");
  const auto c = coefficients_from_json(spec, 1);
  CHECK(c->state_dim() == 1);
  const auto again = coefficients_from_json(c->describe(), 1);
  CHECK(again->describe() == c->describe());
  auto typo = spec;
  typo["f"]["C4"] = 1.0;
  CHECK_THROWS_WITH_AS(coefficients_from_json(typo, 1), doctest::Contains("C4"), std::invalid_argument);
  auto bad_s = spec;
  bad_s["g"]["s"] = "relu";
  CHECK_THROWS_AS(coefficients_from_json(bad_s, 1), std::invalid_argument);
}
