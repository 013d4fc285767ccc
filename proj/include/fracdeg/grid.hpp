#pragma once

// Uniform one-dimensional mesh for an interval problem posed with data on the
// whole line.  The mesh covers (a, b) with n_interior equispaced nodes and is
// extended on both sides until the truncation radius r_trunc of the nonlocal
// operator is reached, so every lattice point needed by the quadrature exists.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace fracdeg::grid {

// Exterior datum g defined on the complement of (a, b), given as a closed
// form together with a growth certificate |g(x)| <= M (1 + |x|)^sigma.
struct ExteriorData {
  std::function<double(double)> eval;
  double growth_M = 0.0;
  double growth_sigma = 0.5;
};

// Spot-checks the growth certificate on a log-spaced sample of exterior
// points out to |x| = 1e6 and probes continuity at a few of them.
// Throws std::invalid_argument on violation.
void validate_exterior_data(const ExteriorData& g, double a, double b);

class Grid1D {
 public:
  // Empty placeholder (no interior nodes) so solution containers can be
  // default-constructed before a real grid is assigned.
  Grid1D() = default;

  // Spacing h = (b - a)/(n_interior + 1); nodes x_k = a + k h for
  // k in [-k_ext, n_interior + 1 + k_ext] with k_ext chosen so that the
  // outermost nodes reach at least r_trunc on both sides.
  Grid1D(double a, double b, int n_interior, double r_trunc);

  double a() const { return a_; }
  double b() const { return b_; }
  double h() const { return h_; }
  double r_trunc() const { return r_trunc_; }
  int n_interior() const { return n_; }
  int k_ext() const { return k_ext_; }

  int k_min() const { return -k_ext_; }
  int k_max() const { return n_ + 1 + k_ext_; }
  int n_nodes() const { return k_max() - k_min() + 1; }

  double x(int k) const { return a_ + k * h_; }
  bool is_interior(int k) const { return k >= 1 && k <= n_; }
  // Storage offset of node k in arrays of length n_nodes().
  int pos(int k) const { return k - k_min(); }

 private:
  double a_ = 0.0, b_ = 0.0, h_ = 1.0, r_trunc_ = 0.0;
  int n_ = 0, k_ext_ = 0;
};

bool same_grid(const Grid1D& p, const Grid1D& q);

// Values over every node of a grid.  The exterior part of a solution always
// holds the sampled datum; solvers only ever rewrite interior entries.
struct GridFunction {
  Grid1D grid;
  std::vector<double> values;  // one entry per node, index grid.pos(k)

  double at(int k) const { return values[grid.pos(k)]; }
  double& at(int k) { return values[grid.pos(k)]; }
};

Grid1D build_grid(double a, double b, int n_interior, double r_trunc);

// Samples g on every exterior node.  Interior nodes are filled from
// u_interior when given, otherwise with the linear interpolation of the
// boundary values g(a), g(b).
GridFunction sample_function(const Grid1D& grid, const ExteriorData& g);
GridFunction sample_function(const Grid1D& grid, const ExteriorData& g, double fill);
GridFunction sample_function(const Grid1D& grid,
                             const std::function<double(double)>& u_interior,
                             const ExteriorData& g);

// Central difference (u_{i+1} - u_{i-1})/(2h) at the interior nodes,
// returned in interior order i = 1..n.  Exact on affine functions, so
// constants are exactly critical for the degenerate equation.
std::vector<double> gradient_central(const GridFunction& u);
// Single-node variant; throws if i is outside 1..n.
double gradient_central(const GridFunction& u, int i);

// CSV serialization: header "x,u", one row per node, 17 significant digits.
void write_csv(const GridFunction& u, std::ostream& out);
void write_csv(const GridFunction& u, const std::string& path);

// Reads a two-column CSV (header "x,<name>") into (x, value) pairs.
std::vector<std::pair<double, double>> read_table(const std::string& path);

}  // namespace fracdeg::grid
