#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mvsde/errors.hpp"
#include "mvsde/path_space.hpp"

using namespace mvsde;

TEST_CASE("time grid from horizon") {
  const auto g = TimeGrid::from_horizon(0.1, 1.0, 2.0);
  CHECK(g.n_history == 10);
  CHECK(g.n_steps == 20);
  CHECK(g.n_nodes() == 31);
  CHECK(g.segment_nodes() == 11);
  CHECK(g.index_of_step(0) == 10);
  CHECK(g.time_of_index(0) == doctest::Approx(-1.0));
  CHECK(g.time_of_index(30) == doctest::Approx(2.0));
  CHECK_THROWS_AS(TimeGrid::from_horizon(0.3, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::from_horizon(0.1, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::from_horizon(0.0, 1.0, 1.0), std::invalid_argument);
  const auto no_delay = TimeGrid::from_horizon(0.25, 0.0, 1.0);
  CHECK(no_delay.segment_nodes() == 1);
}

TEST_CASE("segment_at reads the window ending at t_k") {
  const auto g = TimeGrid::from_horizon(0.5, 1.0, 2.0);
  Trajectory x(g, 1);
  for (std::size_t i = 0; i < g.n_nodes(); ++i) x.node(i)[0] = g.time_of_index(i);
  const Segment s = segment_at(x, 2);
  CHECK(s.nodes() == 3);
  CHECK(s.oldest()[0] == 0.0);
  CHECK(s.present()[0] == 1.0);
  CHECK(s.r0() == 1.0);
  CHECK_THROWS_AS(segment_at(x, 5), std::out_of_range);
  CHECK_THROWS_AS(segment_at(x, -1), std::out_of_range);
}

TEST_CASE("sup distance is a metric on paths") {
  const auto g = TimeGrid::from_horizon(0.1, 0.5, 1.0);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n01;
  auto draw = [&] {
    Trajectory t(g, 2);
    for (auto& v : t.values()) v = n01(gen);
    return t;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = draw(), y = draw(), z = draw();
    CHECK(sup_distance(x, x) == 0.0);
    CHECK(sup_distance(x, y) == sup_distance(y, x));
    CHECK(sup_distance(x, z) <= sup_distance(x, y) + sup_distance(y, z) + 1e-15);
    CHECK(sup_distance(x, y) > 0.0);
  }
  SUBCASE("Euclidean norm per node, max over nodes") {
    Trajectory a(g, 2), b(g, 2);
    b.node(3)[0] = 3.0;
    b.node(3)[1] = 4.0;
    b.node(7)[0] = -4.5;
    CHECK(sup_distance(a, b) == doctest::Approx(5.0));
  }
  SUBCASE("different grids are rejected") {
    Trajectory a(g, 2), b(TimeGrid::from_horizon(0.05, 0.5, 1.0), 2);
    CHECK_THROWS_AS(sup_distance(a, b), GridMismatch);
  }
}

TEST_CASE("initial segment projection") {
  BoxNormalCone half({0.0}, {std::numeric_limits<double>::infinity()});
  const auto p = project_initial_segment(half, Vec{1.0, -0.25, 2.0});
  CHECK(p.values == Vec{1.0, 0.0, 2.0});
  CHECK(p.max_shift == 0.25);
  const auto q = project_initial_segment(half, Vec{1.0, 0.0});
  CHECK(q.max_shift == 0.0);
}

TEST_CASE("trajectory CSV round trip is exact") {
  const auto g = TimeGrid::from_horizon(0.1, 0.3, 0.7);
  Trajectory x(g, 2);
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n01;
  for (auto& v : x.values()) v = n01(gen) * 1e3;
  std::stringstream ss;
  write_trajectory_csv(ss, x);
  const std::string text = ss.str();
  CHECK(text.rfind("t,x1,x2\n", 0) == 0);
  const auto y = read_trajectory_csv(ss);
  CHECK(y.dim() == 2);
  CHECK(y.grid().n_history == 3);
  CHECK(y.grid().n_steps == 7);
  CHECK(y.values() == x.values());
  std::stringstream bad("t,x1\n0,1\n0.1\n");
  CHECK_THROWS(read_trajectory_csv(bad));
}
