#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "fracdeg/grid.hpp"
#include "fracdeg/presets.hpp"

using namespace fracdeg;

TEST_CASE("build_grid basic geometry") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 999, 8.0);
  CHECK(g.h() == 2.0 / 1000.0);
  CHECK(g.n_interior() == 999);
  CHECK(g.a() == -1.0);
  CHECK(g.b() == 1.0);
  // Interior nodes strictly inside the interval.
  CHECK(g.x(1) > -1.0);
  CHECK(g.x(999) < 1.0);
  CHECK(g.x(1) == doctest::Approx(-1.0 + g.h()));
  // Extended nodes reach the truncation radius on both sides.
  CHECK(g.x(g.k_min()) <= -8.0);
  CHECK(g.x(g.k_max()) >= 8.0);
  CHECK(g.n_nodes() == g.k_max() - g.k_min() + 1);
  // pos() is the storage offset.
  CHECK(g.pos(g.k_min()) == 0);
  CHECK(g.pos(g.k_max()) == g.n_nodes() - 1);
  CHECK(g.is_interior(1));
  CHECK(g.is_interior(999));
  CHECK(!g.is_interior(0));
  CHECK(!g.is_interior(1000));
}

TEST_CASE("build_grid tiny grid has exact node positions") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 3, 8.0);
  CHECK(g.h() == 0.5);
  CHECK(g.x(1) == -0.5);
  CHECK(g.x(2) == 0.0);
  CHECK(g.x(3) == 0.5);
  CHECK(g.x(0) == -1.0);
  CHECK(g.x(4) == 1.0);
}

TEST_CASE("build_grid rejects bad input") {
  CHECK_THROWS_AS(grid::build_grid(-1.0, 1.0, 999, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(grid::build_grid(-1.0, 1.0, 2, 8.0), std::invalid_argument);
  CHECK_THROWS_AS(grid::build_grid(1.0, -1.0, 99, 8.0), std::invalid_argument);
  CHECK_THROWS_AS(grid::build_grid(0.0, 0.0, 99, 8.0), std::invalid_argument);
}

TEST_CASE("build_grid covers the truncation radius on asymmetric intervals") {
  const grid::Grid1D g = grid::build_grid(0.5, 1.0, 99, 2.0);
  CHECK(g.x(g.k_min()) <= -2.0);
  CHECK(g.x(g.k_max()) >= 2.0);
  const grid::Grid1D g2 = grid::build_grid(-2.0, 0.25, 199, 4.0);
  CHECK(g2.x(g2.k_min()) <= -4.0);
  CHECK(g2.x(g2.k_max()) >= 4.0);
}

TEST_CASE("same_grid compares defining parameters") {
  const grid::Grid1D a = grid::build_grid(-1.0, 1.0, 99, 8.0);
  const grid::Grid1D b = grid::build_grid(-1.0, 1.0, 99, 8.0);
  const grid::Grid1D c = grid::build_grid(-1.0, 1.0, 98, 8.0);
  CHECK(grid::same_grid(a, b));
  CHECK(!grid::same_grid(a, c));
}

TEST_CASE("sample_function with zero datum gives the zero function") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 49, 8.0);
  const grid::GridFunction u = grid::sample_function(g, presets::datum_constant(0.0));
  for (int k = g.k_min(); k <= g.k_max(); ++k) CHECK(u.at(k) == 0.0);
}

TEST_CASE("sample_function fills interior with the requested constant") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 9, 8.0);
  const grid::ExteriorData d = presets::datum_figure1(0.75);
  const grid::GridFunction u = grid::sample_function(g, d, 3.5);
  for (int i = 1; i <= g.n_interior(); ++i) CHECK(u.at(i) == 3.5);
  // Every node outside the open interval carries the sampled datum.
  for (int k = g.k_min(); k <= 0; ++k) CHECK(u.at(k) == d.eval(g.x(k)));
  for (int k = g.n_interior() + 1; k <= g.k_max(); ++k)
    CHECK(u.at(k) == d.eval(g.x(k)));
}

TEST_CASE("sample_function with interior function") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 9, 8.0);
  const grid::GridFunction u = grid::sample_function(
      g, [](double x) { return x * x; }, presets::datum_constant(1.0));
  for (int i = 1; i <= g.n_interior(); ++i)
    CHECK(u.at(i) == g.x(i) * g.x(i));
  CHECK(u.at(g.k_min()) == 1.0);
}

TEST_CASE("gradient_central is exact on constants and affine functions") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 3, 8.0);

  grid::GridFunction c = grid::sample_function(g, presets::datum_constant(4.0), 4.0);
  for (const double d : grid::gradient_central(c)) CHECK(d == 0.0);

  // Node positions are exact multiples of 1/2 here, so the identity gives
  // difference quotients equal to 1 without rounding.
  grid::GridFunction lin = grid::sample_function(
      g, [](double x) { return x; }, presets::datum_linear(1.0, 0.0));
  for (const double d : grid::gradient_central(lin)) CHECK(d == 1.0);

  grid::GridFunction sq = grid::sample_function(
      g, [](double x) { return x * x; },
      grid::ExteriorData{[](double x) { return x * x; }, 2.0, 2.0});
  CHECK(grid::gradient_central(sq, 2) == 0.0);  // node at x = 0
  CHECK(grid::gradient_central(sq)[1] == 0.0);
}

TEST_CASE("gradient_central single-node variant checks its range") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 5, 8.0);
  const grid::GridFunction u = grid::sample_function(g, presets::datum_constant(1.0));
  CHECK_THROWS_AS(grid::gradient_central(u, 0), std::invalid_argument);
  CHECK_THROWS_AS(grid::gradient_central(u, 6), std::invalid_argument);
  CHECK(grid::gradient_central(u, 3) == grid::gradient_central(u)[2]);
}

TEST_CASE("exterior data growth certificate is enforced") {
  grid::ExteriorData ok;
  ok.eval = [](double x) { return std::sqrt(std::abs(x)); };
  ok.growth_M = 2.0;
  ok.growth_sigma = 0.5;
  CHECK_NOTHROW(grid::validate_exterior_data(ok, -1.0, 1.0));

  grid::ExteriorData bad;
  bad.eval = [](double x) { return x * x; };
  bad.growth_M = 1.0;
  bad.growth_sigma = 0.5;  // quadratic growth cannot satisfy a sqrt bound
  CHECK_THROWS_AS(grid::validate_exterior_data(bad, -1.0, 1.0),
                  std::invalid_argument);

  grid::ExteriorData zero_m;
  zero_m.eval = [](double) { return 1.0; };
  zero_m.growth_M = 0.0;
  zero_m.growth_sigma = 0.5;
  CHECK_THROWS_AS(grid::validate_exterior_data(zero_m, -1.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("csv round trip preserves values bit for bit") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 7, 8.0);
  grid::GridFunction u = grid::sample_function(
      g, [](double x) { return std::sin(3.0 * x) + 1.0 / 3.0; },
      presets::datum_figure1(0.6));
  const std::string path = "test_grid_roundtrip.csv";
  grid::write_csv(u, path);
  const auto rows = grid::read_table(path);
  REQUIRE(static_cast<int>(rows.size()) == g.n_nodes());
  for (int k = g.k_min(); k <= g.k_max(); ++k) {
    CHECK(rows[g.pos(k)].first == g.x(k));
    CHECK(rows[g.pos(k)].second == u.at(k));
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv header is x,u") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 3, 8.0);
  const grid::GridFunction u = grid::sample_function(g, presets::datum_constant(1.0));
  std::ostringstream out;
  grid::write_csv(u, out);
  CHECK(out.str().substr(0, 4) == "x,u\n");
}
