#pragma once

// Ready-made exterior data for the experiment suite.  Each preset carries its
// growth certificate (M, sigma) so tails can be bounded without inspecting
// the formula.

#include "fracdeg/grid.hpp"

namespace fracdeg::presets {

// (1+x)_+^s + (1-x)_+^s; restricted outside (-1,1) this is the datum whose
// harmonic extension inside is the same formula.
double us_exact(double s, double x);

grid::ExteriorData datum_constant(double c);

// a*x + b; linear growth, so usable only for order s > 1/2.
grid::ExteriorData datum_linear(double a, double b);

grid::ExteriorData datum_figure1(double s);

// 0 on [-1,1], linear ramp to 1 across 1 <= |x| <= 2, constant 1 beyond.
grid::ExteriorData datum_two_solutions();

// Odd counterpart: sign(x) * ramp.
grid::ExteriorData datum_four_solutions();

// C * |x|^beta.
grid::ExteriorData datum_power(double C, double beta);

}  // namespace fracdeg::presets
