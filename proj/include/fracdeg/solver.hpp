#pragma once

// Dirichlet solvers for the degenerate equation |Du|^gamma Δ_h^s u = f on the
// interval, with exterior data on the rest of the line.  The linear core is a
// dense factorization of the interior coupling matrix (strictly diagonally
// dominant with nonpositive off-diagonal after negation, i.e. an M-matrix);
// beyond n = 5000 unknowns it switches to conjugate gradients with the FFT
// lattice product and a circulant preconditioner.  The nonlinear drivers are
// damped Picard iterations with lagged gradient coefficient, wrapped in
// epsilon- (viscosity) and eta- (extremal) continuation with warm starts.

#include <memory>
#include <string>
#include <vector>

#include "fracdeg/grid.hpp"
#include "fracdeg/operator.hpp"

namespace fracdeg::solver {

enum class Kind { harmonic, regularized, degenerate, maximal, minimal };
const char* kind_name(Kind k);

struct SolverConfig {
  double gamma = 1.0;
  std::vector<double> eps_schedule;  // strictly decreasing; empty = default
  std::vector<double> eta_schedule;
  double damping = 0.5;       // Picard relaxation, in (0, 1]
  double residual_tol = 1e-8;
  int picard_max = 300;
  double continuation_tol = 1e-4;  // sup-norm stop between continuation stages
};

// Geometric schedule 0.1 * 0.2^k, k = 0..13; last/first = 8.2e-10 <= 1e-6.
std::vector<double> default_schedule();
void validate(const SolverConfig& cfg);

struct Solution {
  grid::GridFunction u;  // exterior entries hold the sampled datum exactly
  Kind kind = Kind::harmonic;
  double residual_sup = 0.0;  // recomputable residual of the solved equation
  int iterations = 0;         // total Picard iterations (1 for linear solves)
  double final_eps = 0.0;
  double final_eta = 0.0;
  bool converged = true;
  std::vector<double> residual_history;
  // Extremal drivers: worst pointwise violation of the expected stage
  // monotonicity (maximal nonincreasing, minimal nondecreasing).
  double stage_monotonicity_violation = 0.0;
};

// Reusable linear core: factors the interior matrix once per (grid, op) and
// serves any tail/right-hand side on that geometry.
class DirichletSolver {
 public:
  DirichletSolver(const grid::Grid1D& grid, const nonlocal::OperatorSpec& op);
  ~DirichletSolver();
  DirichletSolver(DirichletSolver&&) noexcept;
  DirichletSolver& operator=(DirichletSolver&&) noexcept;
  DirichletSolver(const DirichletSolver&) = delete;
  DirichletSolver& operator=(const DirichletSolver&) = delete;

  const grid::Grid1D& grid() const;
  const nonlocal::OperatorSpec& op() const;

  Solution solve_linear(const nonlocal::TailSpec& tail,
                        const std::vector<double>& f) const;
  Solution solve_regularized(const nonlocal::TailSpec& tail,
                             const std::vector<double>& f,
                             const SolverConfig& cfg, double eps,
                             const grid::GridFunction* warm = nullptr) const;
  Solution vanishing_viscosity(const nonlocal::TailSpec& tail,
                               const std::vector<double>& f,
                               const SolverConfig& cfg) const;
  // Maximal (f = -eta_k) or minimal (f = +eta_k) solution of the f = 0
  // problem, eta continuation with eps_k = eta_k at every stage.
  Solution extremal(const nonlocal::TailSpec& tail, Kind side,
                    const SolverConfig& cfg) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot wrappers matching the operation names.
Solution solve_linear_dirichlet(const grid::Grid1D& grid,
                                const nonlocal::OperatorSpec& op,
                                const nonlocal::TailSpec& tail,
                                const std::vector<double>& f);
Solution solve_regularized(const grid::Grid1D& grid,
                           const nonlocal::OperatorSpec& op,
                           const nonlocal::TailSpec& tail,
                           const std::vector<double>& f,
                           const SolverConfig& cfg, double eps);
Solution vanishing_viscosity(const grid::Grid1D& grid,
                             const nonlocal::OperatorSpec& op,
                             const nonlocal::TailSpec& tail,
                             const std::vector<double>& f,
                             const SolverConfig& cfg);
Solution extremal_solution(const grid::Grid1D& grid,
                           const nonlocal::OperatorSpec& op,
                           const nonlocal::TailSpec& tail, Kind side,
                           const SolverConfig& cfg);

// sup_i | |D_h u(x_i)|^gamma * Δ_h^s u(x_i) - f(x_i) | over interior nodes.
double residual_degenerate(const grid::GridFunction& u,
                           const nonlocal::FracLaplacian& F,
                           const std::vector<double>& f, double gamma);
double residual_degenerate(const grid::GridFunction& u,
                           const nonlocal::OperatorSpec& op,
                           const nonlocal::TailSpec& tail,
                           const std::vector<double>& f, double gamma);

// Samples f(x) at the interior nodes, in interior order.
std::vector<double> sample_forcing(const grid::Grid1D& grid,
                                   const std::function<double(double)>& f);

void write_solution_json(const Solution& sol, double s, double gamma,
                         double r_trunc, const std::string& path);

}  // namespace fracdeg::solver
