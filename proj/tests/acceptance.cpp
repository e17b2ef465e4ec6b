// Acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "mvsde/config.hpp"
#include "mvsde/measures.hpp"

using namespace mvsde;

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kInf = std::numeric_limits<double>::infinity();

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::size_t thread_budget() { return std::max(1u, std::thread::hardware_concurrency()); }

CoefficientsPtr brownian_coefficients() {
  Example5Params p;
  p.g = {Nonlinearity::identity, 1.0, 0.0, 0.0, 0.0};
  return std::make_shared<Example5Coefficients>(p, 1);
}

SimConfig brownian(double h = 0.01) {
  SimConfig cfg;
  cfg.grid = TimeGrid::from_horizon(h, 0.0, 1.0);
  cfg.op = std::make_shared<ZeroOperator>(1);
  cfg.coefficients = brownian_coefficients();
  cfg.xi.assign(cfg.grid.segment_nodes(), 0.0);
  cfg.seed = 3;
  return cfg;
}

const ReportCheck* find_check(const ExperimentReport& r, const std::string& key) {
  for (const auto& c : r.checks)
    if (c.name.find(key) != std::string::npos) return &c;
  return nullptr;
}

bool check_passed(const ExperimentReport& r, const std::string& prefix) {
  const auto* c = find_check(r, prefix);
  return c && c->passed;
}

std::string checks_text(const ExperimentReport& r) {
  std::string s;
  for (const auto& c : r.checks) s += (s.empty() ? "" : "; ") + c.name + (c.passed ? " ok" : " FAILED") + " (" + c.detail + ")";
  return s;
}

void reflected_bm() {
  const auto start = Clock::now();
  auto cfg = preset_config("reflected_bm");
  cfg.particles = 10000;
  cfg.seed = 1;
  const auto b = simulate_perturbed(cfg);
  double s = 0.0, s2 = 0.0;
  for (const auto& x : b.particles) {
    const double v = std::abs(x.at_step(static_cast<std::ptrdiff_t>(cfg.grid.n_steps))[0]);
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(b.size());
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / (n - 1.0));
  const double target = std::sqrt(2.0 / M_PI);
  // Mean of the projected walk at this h: sqrt(h / 2 pi) sum_{k <= n} k^{-1/2}.
  double discrete = 0.0;
  for (std::size_t k = 1; k <= cfg.grid.n_steps; ++k) discrete += 1.0 / std::sqrt(static_cast<double>(k));
  discrete *= std::sqrt(cfg.grid.h / (2.0 * M_PI));
  const double elapsed = seconds_since(start);
  const double z = (mean - target) / se;
  report(1, std::abs(z) <= 3.0 && elapsed <= 60.0,
         fmt("mean |X(1)| = %.5f, SE %.5f, sqrt(2/pi) = %.5f, z = %.2f; scheme mean at h=%g is %.5f (z = %.2f); %.1f s",
             mean, se, target, z, cfg.grid.h, discrete, (mean - discrete) / se, elapsed));
}

void delay_ode() {
  double err[2] = {0.0, 0.0};
  bool within = true;
  std::string detail;
  const double hs[2] = {1e-2, 1e-3};
  for (int i = 0; i < 2; ++i) {
    auto cfg = preset_config("delay_linear");
    cfg.grid = TimeGrid::from_horizon(hs[i], 1.0, 2.0);
    cfg.xi.assign(cfg.grid.segment_nodes(), 1.0);
    const auto x = solve_deterministic_limit(cfg).x;
    const auto at = [&](double t) { return x.at_step(static_cast<std::ptrdiff_t>(std::llround(t / hs[i])))[0]; };
    const double e1 = std::abs(at(1.0) - 0.0), e2 = std::abs(at(2.0) + 0.5);
    within = within && e1 <= 5 * hs[i] && e2 <= 5 * hs[i];
    err[i] = std::max(e1, e2);
    detail += fmt("h=%g: X(1)=%.6f X(2)=%.6f; ", hs[i], at(1.0), at(2.0));
  }
  const double ratio = err[0] / err[1];
  report(2, within && ratio >= 1.8, detail + fmt("error ratio %.3f", ratio));
}

void rate_oracle() {
  auto cfg = brownian(0.01);
  Trajectory g(cfg.grid, 1);
  for (std::size_t i = 0; i < cfg.grid.n_nodes(); ++i) g.node(i)[0] = std::max(0.0, cfg.grid.time_of_index(i));
  auto p = make_rate_problem(cfg, g, SkeletonKind::ldp);
  const auto inv = rate_by_inversion(p);
  p.optimizer.warm_start = false;
  const auto pen = rate_by_penalty(p);
  bool ok = std::abs(inv.value - 0.5) <= 1e-12 && std::abs(pen.value - 0.5) <= 0.025 && pen.residual <= 1e-4;
  std::string detail = fmt("inversion %.15f; penalty %.6f (residual %.2e); ", inv.value, pen.value, pen.residual);
  for (const auto& name : preset_names()) {
    const auto pc = preset_config(name);
    const auto q = make_rate_problem(pc, solve_deterministic_limit(pc).x, SkeletonKind::ldp);
    const auto r = evaluate_rate(q);
    ok = ok && r.value <= 1e-4 && r.converged;
    detail += fmt("I(X0) %s = %.2e; ", name.c_str(), r.value);
  }
  report(3, ok, detail);
}

const std::vector<double> kGrid{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};

ExperimentSettings full_settings() {
  ExperimentSettings s;
  s.batches = 8;
  s.replicas_per_batch = 32;
  s.threads = thread_budget();
  return s;
}

void clt_scaling() {
  const auto start = Clock::now();
  auto cfg = preset_config("example5_tanh_reflected");
  cfg.particles = 200;
  cfg.seed = 4;
  auto s = full_settings();
  s.moment_p = 1;
  const auto r = clt_scaling_experiment(cfg, kGrid, s);
  auto deg = brownian();
  deg.particles = 200;
  const auto d = clt_scaling_experiment(deg, kGrid, s);
  const double elapsed = seconds_since(start);
  const bool ok = r.slope && r.slope->slope >= 0.75 && d.exact_match && elapsed <= 600.0;
  report(4, ok,
         (r.slope ? fmt("slope %.4f, CI [%.4f, %.4f]", r.slope->slope, r.slope->ci_low, r.slope->ci_high)
                  : std::string("no slope")) +
             fmt("; degenerate case exact match: %s; %.1f s", d.exact_match ? "yes" : "no", elapsed));
}

void lln() {
  auto cfg = preset_config("example5_tanh_reflected");
  cfg.particles = 200;
  cfg.seed = 5;
  const auto r = lln_experiment(cfg, kGrid, full_settings());
  auto bm = brownian();
  bm.particles = 200;
  auto s = full_settings();
  s.expected_exponent = 1.0;
  const auto b = lln_experiment(bm, kGrid, s);
  const bool ok = check_passed(r, "decreasing") && check_passed(r, "final below") && check_passed(b, "scales as");
  const auto* sc = find_check(b, "scales as");
  report(5, ok, "preset: " + checks_text(r) + "; brownian: " + (sc ? sc->detail : std::string("missing")));
}

void mdp() {
  const std::vector<double> grid{1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  auto cfg = preset_config("example5_tanh_reflected");
  cfg.particles = 200;
  cfg.seed = 6;
  cfg.a_gamma = 0.25;
  auto s = full_settings();
  s.control = preset_mdp_control("example5_tanh_reflected", cfg.grid);
  const auto r = mdp_experiment(cfg, grid, s);
  auto bm = brownian();
  bm.particles = 200;
  bm.a_gamma = 0.25;
  auto sb = full_settings();
  sb.expected_exponent = 0.5;
  const auto b = mdp_experiment(bm, grid, sb);
  const bool ok = check_passed(r, "decreasing") && check_passed(r, "final below") &&
                  check_passed(r, "fourth_moment_controlled") && check_passed(b, "scales as");
  const auto* sc = find_check(b, "scales as");
  report(6, ok, "preset: " + checks_text(r) + "; brownian: " + (sc ? sc->detail : std::string("missing")));
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

double brute_force_w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  std::vector<std::size_t> perm(mu.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = kInf;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += std::pow(segment_distance(mu[i], nu[perm[i]]), 2);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(mu.size()));
}

std::string csv_of(const SolutionBundle& b) {
  std::ostringstream os;
  for (const auto& x : b.particles) write_trajectory_csv(os, x);
  for (const auto& k : b.k_processes) write_trajectory_csv(os, k);
  return os.str();
}

void properties() {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::string detail;
  bool ok = true;

  std::size_t nonexp = 0, mono = 0;
  for (const auto& op : built_ins()) {
    const std::size_t d = op->dimension();
    for (int i = 0; i < 1000; ++i) {
      Vec x(d), y(d);
      for (auto& v : x) v = 3.0 * n01(gen);
      for (auto& v : y) v = 3.0 * n01(gen);
      const double lambda = std::exp(3.0 * unit(gen));
      const auto jx = op->resolvent(lambda, x), jy = op->resolvent(lambda, y);
      double a = 0.0, b = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        a += (jx[c] - jy[c]) * (jx[c] - jy[c]);
        b += (x[c] - y[c]) * (x[c] - y[c]);
      }
      if (std::sqrt(a) > std::sqrt(b) + 1e-12) ++nonexp;
    }
    if (check_monotone(*op, 1000, 77).violated) ++mono;
  }
  ok = ok && nonexp == 0 && mono == 0;
  detail += fmt("nonexpansive violations %zu; monotonicity violations %zu; ", nonexp, mono);

  auto cfg = preset_config("example5_tanh_reflected");
  cfg.particles = 20;
  cfg.epsilon = 1.0;
  cfg.seed = 8;
  cfg.xi.assign(cfg.xi.size(), 0.1);
  const auto b1 = simulate_perturbed(cfg);
  auto shifted = cfg;
  shifted.xi.assign(shifted.xi.size(), 0.0);
  const auto b2 = simulate_perturbed(shifted);
  double worst = kInf, variation = 0.0;
  for (double v : b1.k_variation) variation += v;
  for (std::size_t i = 0; i < b1.size(); ++i)
    for (std::size_t k = 0; k < cfg.grid.n_steps; ++k) {
      const auto kk = static_cast<std::ptrdiff_t>(k);
      const double dx = b1.particles[i].at_step(kk + 1)[0] - b2.particles[i].at_step(kk + 1)[0];
      const double dk = (b1.k_processes[i].at_step(kk + 1)[0] - b1.k_processes[i].at_step(kk)[0]) -
                        (b2.k_processes[i].at_step(kk + 1)[0] - b2.k_processes[i].at_step(kk)[0]);
      worst = std::min(worst, dx * dk);
    }
  ok = ok && worst >= -1e-10 && variation > 0.0;
  detail += fmt("min pairing %.3g over runs with total K variation %.3g; ", worst, variation);

  auto em = cfg;
  em.op = std::make_shared<ZeroOperator>(1);
  em.particles = 6;
  const auto be = simulate_perturbed(em);
  std::vector<Trajectory> replay(be.size(), Trajectory(em.grid, 1));
  for (auto& x : replay) std::copy(em.xi.begin(), em.xi.end(), x.values().begin());
  for (std::size_t k = 0; k < em.grid.n_steps; ++k) {
    const auto kk = static_cast<std::ptrdiff_t>(k);
    std::vector<Segment> segs;
    for (const auto& x : replay) segs.push_back(segment_at(x, kk));
    const EmpiricalMeasure mu(segs);
    for (std::size_t i = 0; i < replay.size(); ++i) {
      const double drift = eval_b(*em.coefficients, segs[i], mu)[0];
      const double sigma = eval_sigma(*em.coefficients, segs[i], mu)[0];
      replay[i].at_step(kk + 1)[0] =
          replay[i].at_step(kk)[0] + em.grid.h * drift + (std::sqrt(em.epsilon) * sigma) * be.increment(i, k)[0];
    }
  }
  bool bitwise = true;
  for (std::size_t i = 0; i < be.size(); ++i) bitwise = bitwise && replay[i].values() == be.particles[i].values();
  ok = ok && bitwise;
  detail += std::string("Euler-Maruyama bitwise ") + (bitwise ? "yes" : "no") + "; ";

  auto random_atoms = [&](std::size_t p, std::size_t nodes, std::size_t d) {
    std::vector<SegmentBuffer> v;
    for (std::size_t i = 0; i < p; ++i) {
      SegmentBuffer s{Vec(nodes * d), d, 0.1};
      for (auto& x : s.values) x = n01(gen);
      v.push_back(std::move(s));
    }
    return v;
  };
  auto views = [](const std::vector<SegmentBuffer>& v) {
    std::vector<Segment> out;
    for (const auto& s : v) out.push_back(s.view());
    return out;
  };
  double w2_gap = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t p = 1 + static_cast<std::size_t>(t % 6);
    const auto a = random_atoms(p, 5, 2), c = random_atoms(p, 5, 2);
    const EmpiricalMeasure mu(views(a)), nu(views(c));
    w2_gap = std::max(w2_gap, std::abs(w2_assignment(mu, nu) - brute_force_w2(mu, nu)));
  }
  ok = ok && w2_gap <= 1e-12;
  detail += fmt("W2 vs brute force max gap %.2e; ", w2_gap);

  double lions_gap = 0.0;
  for (int t = 0; t < 100; ++t) {
    Example5Params prm;
    auto functional = [&]() {
      return SegmentFunctional{gen() % 2 ? Nonlinearity::tanh : Nonlinearity::identity, unit(gen), unit(gen), unit(gen),
                               unit(gen)};
    };
    prm.f = functional();
    prm.g = functional();
    prm.alpha = unit(gen);
    prm.beta = unit(gen);
    const std::size_t d = 1 + static_cast<std::size_t>(t % 2);
    const auto fam = std::make_shared<Example5Coefficients>(prm, d);
    const std::size_t p = 1 + static_cast<std::size_t>(gen() % 8);
    const auto atoms = random_atoms(p, 11, d), dirs = random_atoms(p, 11, d), z = random_atoms(1, 11, d);
    const auto dv = views(dirs);
    const auto closed = lions_pairing(*fam, z[0].view(), EmpiricalMeasure(views(atoms)), dv);
    const auto diff = lions_pairing_fd(*fam, z[0].view(), EmpiricalMeasure(views(atoms)), dv);
    for (std::size_t c = 0; c < d; ++c) lions_gap = std::max(lions_gap, std::abs(closed[c] - diff[c]));
  }
  ok = ok && lions_gap <= 1e-6;
  detail += fmt("Lions closed form vs difference max gap %.2e; ", lions_gap);

  const bool same = csv_of(simulate_perturbed(cfg)) == csv_of(b1);
  ok = ok && same;
  detail += std::string("seed determinism ") + (same ? "yes" : "no");
  report(7, ok, detail);
}

void continuity() {
  const auto cfg = preset_config("example5_tanh_reflected");
  const auto base = Control::constant(cfg.grid.n_steps, cfg.grid.h, {1.0});
  ContinuitySettings s;
  const auto r = skeleton_continuity_check(cfg, base, s);
  report(8, r.passed && s.amplitudes.size() >= 4, checks_text(r));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  reflected_bm();
  delay_ode();
  rate_oracle();
  clt_scaling();
  lln();
  mdp();
  properties();
  continuity();
  std::printf("%d of 8 criteria failed; total %.1f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
