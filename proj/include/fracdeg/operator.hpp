#pragma once

// Monotone discretization of the one-dimensional fractional Laplacian of
// order 2s with exterior data on the whole line, plus the extremal (Pucci)
// operators over the uniformly elliptic kernel class bounded between
// lambda/|z|^{1+2s} and Lambda/|z|^{1+2s}.
//
// At an interior node x_i the operator is a symmetric second-difference sum
//   sum_k w_k (u_{i+k} + u_{i-k} - 2 u_i)  +  far-field tail,
// with nonnegative cell weights.  The cell (0, 3h/2) is represented through
// the first second difference scaled by the exact kernel second moment of the
// cell, so the scheme is exact on local quadratics.  Cells beyond the lattice
// edge are handled by quadrature of the exterior datum, with the part beyond
// r_far integrated to infinity by a change of variables.

#include <memory>
#include <string>
#include <vector>

#include "fracdeg/grid.hpp"

namespace fracdeg::nonlocal {

struct OperatorSpec {
  double s = 0.75;
  double c_norm = 0.0;          // 4^s s Gamma(1/2+s) / (sqrt(pi) Gamma(1-s))
  double lambda_ell = 1.0;      // kernel class ellipticity bounds
  double Lambda_ell = 1.0;
  std::vector<double> weights;  // w_1..w_K, normalized by c_norm
  double h = 0.0;               // spacing the weights were built for
  double r_trunc = 0.0;         // requested lattice truncation radius
  double z_lattice = 0.0;       // (K + 1/2) h: where the lattice ends and the
                                // numeric tail begins (r_trunc snapped to the
                                // nearest cell edge)
  double r_far = 0.0;           // numeric quadrature range ends here

  int n_offsets() const { return static_cast<int>(weights.size()); }
  double weight_sum() const;
  // Exact kernel mass c_norm * integral_{z_lattice}^{inf} z^{-1-2s} dz.
  double tail_mass() const;
};

double normalization_constant(double s);

// Builds the weights for the grid spacing.  lambda/Lambda parametrize the
// Pucci operators; the fractional Laplacian itself does not use them.
OperatorSpec build_operator(const grid::Grid1D& grid, double s, double r_far,
                            double lambda_ell = 1.0, double Lambda_ell = 1.0);

// Exterior datum bundled with the truncation geometry.  Construction verifies
// the growth certificate, requires sigma < 2s, and checks that the analytic
// remainder bound beyond r_far stays below the declared tolerance.
struct TailSpec {
  grid::ExteriorData g;
  double r_trunc = 0.0;
  double r_far = 0.0;
  double tolerance = 0.0;
  double remainder_bound = 0.0;  // growth-based bound on the part beyond r_far
};

TailSpec make_tail(const grid::Grid1D& grid, const OperatorSpec& op,
                   grid::ExteriorData g, double tolerance = 0.5);

// Growth-based bound on the kernel mass of g beyond r_far for base points
// within radius r0, i.e. the quantity make_tail checks against its tolerance.
// Useful for sizing the tolerance when sigma sits close to 2s.
double tail_remainder_bound(const OperatorSpec& op, const grid::ExteriorData& g,
                            double r0);

struct TailIntegral {
  double value;           // quadrature over (r_trunc, r_far)
  double remainder_bound; // bound on the neglected part beyond r_far
};

// Far-field integral c_norm int_{r_trunc}^{r_far} (g(x+z)+g(x-z)-2 u_x) z^{-1-2s} dz
// with the analytic remainder bound reported alongside.
TailIntegral tail_integral(const OperatorSpec& op, const TailSpec& tail,
                           double x, double u_x);

// Evaluator bound to one (grid, operator, tail) triple.  Construction caches
// the per-node exterior tail integrals and the beyond-grid lattice values, so
// repeated applications only pay for the lattice sum.  Instances are not
// safe for concurrent use; create one per worker.
class FracLaplacian {
 public:
  FracLaplacian(const grid::Grid1D& grid, const OperatorSpec& op,
                const TailSpec& tail);
  ~FracLaplacian();
  FracLaplacian(FracLaplacian&&) noexcept;
  FracLaplacian& operator=(FracLaplacian&&) noexcept;
  FracLaplacian(const FracLaplacian&) = delete;
  FracLaplacian& operator=(const FracLaplacian&) = delete;

  // Direct O(n K) summation over interior nodes, in interior order.
  std::vector<double> apply(const grid::GridFunction& u) const;
  // Same values via FFT convolution of the Toeplitz lattice stencil,
  // O(N log N); agrees with apply() to roundoff.
  std::vector<double> apply_fast(const grid::GridFunction& u) const;
  // Lattice part for interior values extended by zero: the homogeneous
  // linear map of the Dirichlet system (no exterior data, no tail offset).
  std::vector<double> apply_homogeneous(const std::vector<double>& interior) const;

  const grid::Grid1D& grid() const;
  const OperatorSpec& op() const;
  const TailSpec& tail() const;
  // Cached per-interior-node quadrature of the exterior datum over
  // (z_lattice, infinity), recentred at a constant anchor A so the operator
  // adds t_i + 2 (A - u_i) tail_mass; identically zero for constant data.
  const std::vector<double>& tail_offset() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrappers around a temporary FracLaplacian.
std::vector<double> apply_frac_laplacian(const grid::GridFunction& u,
                                         const OperatorSpec& op,
                                         const TailSpec& tail);
std::vector<double> apply_frac_laplacian_fast(const grid::GridFunction& u,
                                              const OperatorSpec& op,
                                              const TailSpec& tail);

enum class Pucci { plus, minus };

// Extremal operator over the kernel class, using the raw (un-normalized)
// cell weights w_k / c_norm and sign-split ellipticity coefficients.
std::vector<double> apply_pucci(const grid::GridFunction& u,
                                const OperatorSpec& op, const TailSpec& tail,
                                Pucci side);

struct BenchRow {
  int n;
  double s;
  double direct_seconds;
  double fast_seconds;
  double max_rel_diff;
};

// Times prepared direct vs FFT application on grids over (-1, 1) with the
// given datum; u is sampled from u0 inside.
std::vector<BenchRow> run_fastpath_benchmark(
    const std::vector<int>& ns, double s, double r_trunc, double r_far,
    const grid::ExteriorData& g, const std::function<double(double)>& u0,
    int repetitions = 5);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace fracdeg::nonlocal
