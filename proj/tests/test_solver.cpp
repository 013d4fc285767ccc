#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "fracdeg/grid.hpp"
#include "fracdeg/operator.hpp"
#include "fracdeg/presets.hpp"
#include "fracdeg/solver.hpp"

using namespace fracdeg;

namespace {

struct Problem {
  grid::Grid1D g;
  nonlocal::OperatorSpec op;
  nonlocal::TailSpec tail;
};

Problem make_problem(int n, double s, const grid::ExteriorData& d,
                     double r_trunc = 8.0, double r_far = 1e4) {
  grid::Grid1D g = grid::build_grid(-1.0, 1.0, n, r_trunc);
  nonlocal::OperatorSpec op = nonlocal::build_operator(g, s, r_far);
  nonlocal::TailSpec tail = nonlocal::make_tail(g, op, d);
  return {std::move(g), std::move(op), std::move(tail)};
}

double sup_interior_error(const solver::Solution& sol,
                          const std::function<double(double)>& target) {
  double m = 0.0;
  for (int i = 1; i <= sol.u.grid.n_interior(); ++i)
    m = std::max(m, std::abs(sol.u.at(i) - target(sol.u.grid.x(i))));
  return m;
}

void check_exterior_exact(const solver::Solution& sol,
                          const grid::ExteriorData& d) {
  const grid::Grid1D& g = sol.u.grid;
  for (int k = g.k_min(); k <= g.k_max(); ++k) {
    if (g.is_interior(k)) continue;
    CHECK(sol.u.at(k) == d.eval(g.x(k)));
  }
}

}  // namespace

TEST_CASE("default schedule is admissible") {
  const std::vector<double> sched = solver::default_schedule();
  REQUIRE(sched.size() == 14);
  CHECK(sched.front() == 0.1);
  for (size_t i = 0; i + 1 < sched.size(); ++i) {
    CHECK(sched[i + 1] < sched[i]);
    CHECK(sched[i + 1] / sched[i] == doctest::Approx(0.2));
  }
  CHECK(sched.back() <= 1e-6 * sched.front());
  solver::SolverConfig cfg;
  CHECK_NOTHROW(solver::validate(cfg));
}

TEST_CASE("solver config validation") {
  solver::SolverConfig cfg;
  cfg.damping = 0.0;
  CHECK_THROWS_AS(solver::validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.eps_schedule = {0.1, 0.2};  // not decreasing
  CHECK_THROWS_AS(solver::validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.eps_schedule = {0.1, 0.05};  // does not descend far enough
  CHECK_THROWS_AS(solver::validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.gamma = -1.0;
  CHECK_THROWS_AS(solver::validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.residual_tol = 0.0;
  CHECK_THROWS_AS(solver::validate(cfg), std::invalid_argument);
}

TEST_CASE("linear solve reproduces a constant datum") {
  const grid::ExteriorData d = presets::datum_constant(2.5);
  const Problem p = make_problem(149, 0.75, d);
  const std::vector<double> f(p.g.n_interior(), 0.0);
  const solver::Solution sol =
      solver::solve_linear_dirichlet(p.g, p.op, p.tail, f);
  CHECK(sol.kind == solver::Kind::harmonic);
  CHECK(sol.iterations == 1);
  CHECK(sol.converged);
  CHECK(sup_interior_error(sol, [](double) { return 2.5; }) <= 1e-10);
  CHECK(sol.residual_sup <= 1e-9);
  check_exterior_exact(sol, d);
}

TEST_CASE("linear solve rejects a wrong-length forcing vector") {
  const Problem p = make_problem(49, 0.75, presets::datum_constant(1.0));
  const solver::DirichletSolver solver(p.g, p.op);
  CHECK_THROWS_AS(solver.solve_linear(p.tail, std::vector<double>(5, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("linear solve converges to the explicit harmonic profile") {
  const double s = 0.75;
  const grid::ExteriorData d = presets::datum_figure1(s);
  auto target = [s](double x) { return presets::us_exact(s, x); };
  double prev = 0.0;
  int step = 0;
  for (const int n : {499, 999}) {
    const Problem p = make_problem(n, s, d);
    const std::vector<double> f(p.g.n_interior(), 0.0);
    const solver::Solution sol =
        solver::solve_linear_dirichlet(p.g, p.op, p.tail, f);
    const double err = sup_interior_error(sol, target);
    CHECK(err <= 3e-2);
    if (step > 0) CHECK(err < prev);
    prev = err;
    ++step;
  }
}

TEST_CASE("strong regularization approaches the scaled linear problem") {
  const double eps = 1e3;
  const Problem p = make_problem(149, 0.75, presets::datum_figure1(0.75));
  const std::vector<double> f(p.g.n_interior(), 1.0);
  solver::SolverConfig cfg;
  const solver::DirichletSolver solver(p.g, p.op);

  const solver::Solution reg = solver.solve_regularized(p.tail, f, cfg, eps);
  CHECK(reg.converged);
  CHECK(reg.kind == solver::Kind::regularized);
  CHECK(reg.final_eps == eps);

  std::vector<double> fs(f);
  for (double& v : fs) v /= eps;
  const solver::Solution lin = solver.solve_linear(p.tail, fs);
  double diff = 0.0;
  for (int i = 1; i <= p.g.n_interior(); ++i)
    diff = std::max(diff, std::abs(reg.u.at(i) - lin.u.at(i)));
  CHECK(diff <= 1e-2);
}

TEST_CASE("solve_regularized validates eps and the config") {
  const Problem p = make_problem(49, 0.75, presets::datum_constant(1.0));
  const std::vector<double> f(p.g.n_interior(), 0.0);
  solver::SolverConfig cfg;
  CHECK_THROWS_AS(solver::solve_regularized(p.g, p.op, p.tail, f, cfg, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(solver::solve_regularized(p.g, p.op, p.tail, f, cfg, -1.0),
                  std::invalid_argument);
}

TEST_CASE("warm started solve finishes immediately at its own fixed point") {
  const Problem p = make_problem(99, 0.75, presets::datum_figure1(0.75));
  const std::vector<double> f(p.g.n_interior(), 1.0);
  solver::SolverConfig cfg;
  const solver::DirichletSolver solver(p.g, p.op);
  const solver::Solution first = solver.solve_regularized(p.tail, f, cfg, 1.0);
  REQUIRE(first.converged);
  const solver::Solution again =
      solver.solve_regularized(p.tail, f, cfg, 1.0, &first.u);
  CHECK(again.converged);
  CHECK(again.iterations <= 3);
}

TEST_CASE("vanishing viscosity limit is schedule independent for nonvanishing f") {
  const grid::ExteriorData d = presets::datum_constant(0.0);
  // Even n keeps the solution's critical point between nodes, so the lagged
  // gradient coefficient stays bounded along the whole schedule.
  const Problem p = make_problem(198, 0.75, d);
  const std::vector<double> f(p.g.n_interior(), 1.0);
  const solver::DirichletSolver solver(p.g, p.op);

  solver::SolverConfig cfg1;  // default schedule
  solver::SolverConfig cfg2;
  for (int k = 0; k < 10; ++k)
    cfg2.eps_schedule.push_back(0.05 * std::pow(0.15, k));

  const solver::Solution u1 = solver.vanishing_viscosity(p.tail, f, cfg1);
  const solver::Solution u2 = solver.vanishing_viscosity(p.tail, f, cfg2);
  REQUIRE(u1.converged);
  REQUIRE(u2.converged);
  CHECK(u1.kind == solver::Kind::degenerate);
  double diff = 0.0;
  for (int i = 1; i <= p.g.n_interior(); ++i)
    diff = std::max(diff, std::abs(u1.u.at(i) - u2.u.at(i)));
  CHECK(diff <= 2.0 * cfg1.continuation_tol);

  // final_eps is one of the schedule entries, and the reported residual is
  // the recomputable residual of the degenerate equation.
  bool found = false;
  for (const double e : solver::default_schedule()) found = found || e == u1.final_eps;
  CHECK(found);
  CHECK(u1.residual_sup ==
        solver::residual_degenerate(u1.u, p.op, p.tail, f, cfg1.gamma));
  check_exterior_exact(u1, d);
}

TEST_CASE("non-convergence is reported with the residual history") {
  const Problem p = make_problem(99, 0.75, presets::datum_figure1(0.75));
  const std::vector<double> f(p.g.n_interior(), 1.0);
  solver::SolverConfig cfg;
  cfg.gamma = 2.0;
  cfg.picard_max = 2;
  cfg.residual_tol = 1e-14;
  cfg.eps_schedule = {1e-2, 1e-9};
  const solver::Solution sol =
      solver::vanishing_viscosity(p.g, p.op, p.tail, f, cfg);
  CHECK(!sol.converged);
  CHECK(sol.residual_history.size() >= 1);
}

TEST_CASE("extremal solutions bracket a constant datum and tighten with h") {
  // At nodes whose central gradient vanishes exactly, the continuation's
  // forcing ratio eta/(eta + |du|^gamma) stays 1, which leaves an O(h^{2s})
  // halo around the constant.  The bracket must be ordered and must shrink
  // under refinement.
  const grid::ExteriorData d = presets::datum_constant(2.0);
  solver::SolverConfig cfg;
  auto bracket = [&](int n) {
    const Problem p = make_problem(n, 0.75, d);
    const solver::DirichletSolver solver(p.g, p.op);
    const solver::Solution hi =
        solver.extremal(p.tail, solver::Kind::maximal, cfg);
    const solver::Solution lo =
        solver.extremal(p.tail, solver::Kind::minimal, cfg);
    REQUIRE(hi.converged);
    REQUIRE(lo.converged);
    CHECK(hi.kind == solver::Kind::maximal);
    CHECK(lo.kind == solver::Kind::minimal);
    CHECK(hi.final_eta > 0.0);
    double worst = 0.0, dev = 0.0;
    for (int i = 1; i <= p.g.n_interior(); ++i) {
      worst = std::max(worst, lo.u.at(i) - hi.u.at(i));
      dev = std::max({dev, std::abs(hi.u.at(i) - 2.0),
                      std::abs(lo.u.at(i) - 2.0)});
    }
    CHECK(worst <= 2.0 * cfg.continuation_tol);  // minimal below maximal
    CHECK(hi.stage_monotonicity_violation <= 10.0 * cfg.residual_tol);
    CHECK(lo.stage_monotonicity_violation <= 10.0 * cfg.residual_tol);
    check_exterior_exact(hi, d);
    return dev;
  };
  const double dev_coarse = bracket(149);
  const double dev_fine = bracket(299);
  CHECK(dev_coarse <= 2.5e-2);
  CHECK(dev_fine < 0.6 * dev_coarse);
}

TEST_CASE("extremal rejects a non-extremal side") {
  const Problem p = make_problem(49, 0.75, presets::datum_constant(1.0));
  solver::SolverConfig cfg;
  CHECK_THROWS_AS(
      solver::extremal_solution(p.g, p.op, p.tail, solver::Kind::harmonic, cfg),
      std::invalid_argument);
}

TEST_CASE("degenerate residual vanishes exactly at critical profiles") {
  const double s = 0.75;
  // Constant profile with the boundary-growth datum: the central gradient is
  // identically zero, so the degenerate equation holds with f = 0.
  {
    const grid::ExteriorData d = presets::datum_figure1(s);
    const Problem p = make_problem(199, s, d);
    const grid::GridFunction v = grid::sample_function(
        p.g, [s](double) { return std::pow(2.0, s); }, d);
    const std::vector<double> f(p.g.n_interior(), 0.0);
    CHECK(solver::residual_degenerate(v, p.op, p.tail, f, 1.0) == 0.0);
  }
  // Zero extension of the ramp datum: flat through the first exterior ring.
  {
    const grid::ExteriorData d = presets::datum_two_solutions();
    const Problem p = make_problem(199, s, d);
    const grid::GridFunction v = grid::sample_function(p.g, d, 0.0);
    const std::vector<double> f(p.g.n_interior(), 0.0);
    CHECK(solver::residual_degenerate(v, p.op, p.tail, f, 1.0) == 0.0);
  }
}

TEST_CASE("degenerate residual of a harmonic output obeys the product bound") {
  const Problem p = make_problem(149, 0.75, presets::datum_figure1(0.75));
  const std::vector<double> f(p.g.n_interior(), 0.0);
  const solver::Solution sol =
      solver::solve_linear_dirichlet(p.g, p.op, p.tail, f);
  double dmax = 0.0;
  for (const double v : grid::gradient_central(sol.u))
    dmax = std::max(dmax, std::abs(v));
  const double r = solver::residual_degenerate(sol.u, p.op, p.tail, f, 1.0);
  CHECK(r <= dmax * sol.residual_sup + 1e-15);
}

TEST_CASE("solution sidecar holds the run parameters") {
  const Problem p = make_problem(49, 0.6, presets::datum_constant(1.0));
  const std::vector<double> f(p.g.n_interior(), 0.0);
  const solver::Solution sol =
      solver::solve_linear_dirichlet(p.g, p.op, p.tail, f);
  const std::string path = "test_solver_sidecar.json";
  solver::write_solution_json(sol, 0.6, 1.0, 8.0, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  CHECK(j["kind"] == "harmonic");
  CHECK(j["n"] == 49);
  CHECK(j["s"] == 0.6);
  CHECK(j["gamma"] == 1.0);
  CHECK(j["r_trunc"] == 8.0);
  CHECK(j["iterations"] == 1);
  CHECK(j.contains("residual_sup"));
  CHECK(j.contains("final_eps"));
  CHECK(j.contains("final_eta"));
  std::filesystem::remove(path);
}

TEST_CASE("sample_forcing evaluates at the interior nodes") {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, 9, 8.0);
  const std::vector<double> f =
      solver::sample_forcing(g, [](double x) { return 2.0 * x; });
  REQUIRE(static_cast<int>(f.size()) == 9);
  for (int i = 1; i <= 9; ++i) CHECK(f[i - 1] == 2.0 * g.x(i));
}
