#include "fracdeg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fracdeg::grid {

void validate_exterior_data(const ExteriorData& g, double a, double b) {
  if (!g.eval) throw std::invalid_argument("exterior datum has no evaluator");
  if (g.growth_M < 0.0)
    throw std::invalid_argument("exterior growth constant M must be >= 0");
  const double r0 = std::max(std::abs(a), std::abs(b));
  // Log-spaced |x| from the boundary out to 1e6, both sides.
  for (int j = 0; j <= 40; ++j) {
    const double r = r0 * std::pow(1e6 / r0, j / 40.0);
    for (const double x : {r, -r}) {
      if (x > a && x < b) continue;
      const double bound = g.growth_M * std::pow(1.0 + std::abs(x), g.growth_sigma);
      const double v = g.eval(x);
      if (!std::isfinite(v))
        throw std::invalid_argument("exterior datum is not finite at sampled point");
      if (std::abs(v) > bound * (1.0 + 1e-12) + 1e-300)
        throw std::invalid_argument("exterior datum violates its growth certificate");
      // Coarse continuity probe; tolerates kinks, rejects jumps.
      const double dx = 1e-7 * (1.0 + std::abs(x));
      const double xs = (x >= b) ? x + dx : x - dx;
      if (std::abs(g.eval(xs) - v) > 1e-3 * (1.0 + std::abs(v)) + 10.0 * dx)
        throw std::invalid_argument("exterior datum looks discontinuous at sampled point");
    }
  }
}

Grid1D::Grid1D(double a, double b, int n_interior, double r_trunc)
    : a_(a), b_(b), r_trunc_(r_trunc), n_(n_interior) {
  if (!(b > a)) throw std::invalid_argument("grid requires b > a");
  if (n_interior < 3) throw std::invalid_argument("grid requires n_interior >= 3");
  const double r0 = std::max(std::abs(a), std::abs(b));
  if (!(r_trunc >= 2.0 * r0))
    throw std::invalid_argument("truncation radius must be at least 2*max(|a|,|b|)");
  h_ = (b - a) / (n_interior + 1);
  // Per-side counts so both outermost nodes pass r_trunc: a - k h <= -r_trunc
  // and b + k h >= r_trunc.
  const double k_left = std::ceil((r_trunc + a) / h_);
  const double k_right = std::ceil((r_trunc - b) / h_);
  k_ext_ = static_cast<int>(std::max({k_left, k_right, 0.0}));
  // Guard against roundoff leaving an outermost node short of r_trunc.
  while (std::min(std::abs(x(-k_ext_)), std::abs(x(n_ + 1 + k_ext_))) < r_trunc_)
    ++k_ext_;
}

Grid1D build_grid(double a, double b, int n_interior, double r_trunc) {
  return Grid1D(a, b, n_interior, r_trunc);
}

bool same_grid(const Grid1D& p, const Grid1D& q) {
  return p.a() == q.a() && p.b() == q.b() && p.n_interior() == q.n_interior() &&
         p.r_trunc() == q.r_trunc();
}

GridFunction sample_function(const Grid1D& grid, const ExteriorData& g, double fill) {
  return sample_function(
      grid, [fill](double) { return fill; }, g);
}

GridFunction sample_function(const Grid1D& grid, const ExteriorData& g) {
  validate_exterior_data(g, grid.a(), grid.b());
  const double ga = g.eval(grid.a());
  const double gb = g.eval(grid.b());
  auto interp = [&](double x) {
    const double t = (x - grid.a()) / (grid.b() - grid.a());
    return (1.0 - t) * ga + t * gb;
  };
  return sample_function(grid, interp, g);
}

GridFunction sample_function(const Grid1D& grid,
                             const std::function<double(double)>& u_interior,
                             const ExteriorData& g) {
  if (!u_interior) throw std::invalid_argument("interior sampler is empty");
  validate_exterior_data(g, grid.a(), grid.b());
  GridFunction u{grid, std::vector<double>(grid.n_nodes(), 0.0)};
  for (int k = grid.k_min(); k <= grid.k_max(); ++k)
    u.values[grid.pos(k)] = grid.is_interior(k) ? u_interior(grid.x(k)) : g.eval(grid.x(k));
  return u;
}

std::vector<double> gradient_central(const GridFunction& u) {
  const Grid1D& g = u.grid;
  std::vector<double> d(g.n_interior());
  const double inv2h = 1.0 / (2.0 * g.h());
  for (int i = 1; i <= g.n_interior(); ++i)
    d[i - 1] = (u.at(i + 1) - u.at(i - 1)) * inv2h;
  return d;
}

double gradient_central(const GridFunction& u, int i) {
  if (i < 1 || i > u.grid.n_interior())
    throw std::invalid_argument("gradient_central: index outside the interior range");
  return (u.at(i + 1) - u.at(i - 1)) / (2.0 * u.grid.h());
}

void write_csv(const GridFunction& u, std::ostream& out) {
  out << "x,u\n";
  char buf[80];
  for (int k = u.grid.k_min(); k <= u.grid.k_max(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", u.grid.x(k), u.at(k));
    out << buf;
  }
}

void write_csv(const GridFunction& u, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(u, f);
}

std::vector<std::pair<double, double>> read_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::pair<double, double>> rows;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty table: " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string xa, ua;
    if (!std::getline(ss, xa, ',') || !std::getline(ss, ua))
      throw std::runtime_error("malformed row in " + path + ": " + line);
    rows.emplace_back(std::stod(xa), std::stod(ua));
  }
  return rows;
}

}  // namespace fracdeg::grid
