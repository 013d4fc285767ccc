#include "fracdeg/presets.hpp"

#include <algorithm>
#include <cmath>

namespace fracdeg::presets {

namespace {
double clamp01(double t) { return std::clamp(t, 0.0, 1.0); }
}  // namespace

double us_exact(double s, double x) {
  const double p = std::max(1.0 + x, 0.0);
  const double m = std::max(1.0 - x, 0.0);
  return std::pow(p, s) + std::pow(m, s);
}

grid::ExteriorData datum_constant(double c) {
  grid::ExteriorData g;
  g.eval = [c](double) { return c; };
  g.growth_M = std::max(std::abs(c), 1e-30);
  g.growth_sigma = 0.1;
  return g;
}

grid::ExteriorData datum_linear(double a, double b) {
  grid::ExteriorData g;
  g.eval = [a, b](double x) { return a * x + b; };
  g.growth_M = std::max(std::abs(a) + std::abs(b), 1e-30);
  g.growth_sigma = 1.0;
  return g;
}

grid::ExteriorData datum_figure1(double s) {
  grid::ExteriorData g;
  g.eval = [s](double x) { return us_exact(s, x); };
  g.growth_M = 2.0;
  g.growth_sigma = s;
  return g;
}

grid::ExteriorData datum_two_solutions() {
  grid::ExteriorData g;
  g.eval = [](double x) { return clamp01(std::abs(x) - 1.0); };
  g.growth_M = 1.0;
  g.growth_sigma = 0.1;
  return g;
}

grid::ExteriorData datum_four_solutions() {
  grid::ExteriorData g;
  g.eval = [](double x) {
    const double r = clamp01(std::abs(x) - 1.0);
    return x < 0.0 ? -r : r;
  };
  g.growth_M = 1.0;
  g.growth_sigma = 0.1;
  return g;
}

grid::ExteriorData datum_power(double C, double beta) {
  grid::ExteriorData g;
  g.eval = [C, beta](double x) { return C * std::pow(std::abs(x), beta); };
  g.growth_M = std::max(std::abs(C), 1e-30);
  g.growth_sigma = beta;
  return g;
}

}  // namespace fracdeg::presets
