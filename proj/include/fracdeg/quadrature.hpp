#pragma once

// Adaptive Gauss-Kronrod 7/15 quadrature used for the far-field integrals of
// the nonlocal operator.  Deterministic: the subdivision depends only on the
// integrand values, never on timing or global state.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace fracdeg::quad {

namespace detail {
// Kronrod-15 abscissae (positive half) and weights; Gauss-7 weights embed at
// the odd Kronrod nodes.  Standard QUADPACK constants.
inline constexpr double xk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
  double value;
  double error;
};

template <class F>
PanelResult gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  double ik = 0.0, ig = 0.0;
  for (int j = 0; j < 8; ++j) {
    const double fx = (j == 7) ? f(c) : f(c - r * xk[j]) + f(c + r * xk[j]);
    ik += wk[j] * fx;
    if (j % 2 == 1) ig += wg[j / 2] * fx;
  }
  ik *= r;
  ig *= r;
  const double diff = std::abs(ik - ig);
  // QUADPACK-style sharpened error estimate.
  return {ik, diff * std::sqrt(diff)};
}

template <class F>
double adaptive(const F& f, double a, double b, double abs_tol, double rel_tol,
                int depth) {
  const PanelResult p = gk15(f, a, b);
  if (p.error <= abs_tol + rel_tol * std::abs(p.value) || depth <= 0)
    return p.value;
  const double m = 0.5 * (a + b);
  return adaptive(f, a, m, 0.5 * abs_tol, rel_tol, depth - 1) +
         adaptive(f, m, b, 0.5 * abs_tol, rel_tol, depth - 1);
}
}  // namespace detail

// Integrates f over the finite interval (a, b).
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-12,
                 double rel_tol = 1e-10) {
  if (!(b >= a)) throw std::invalid_argument("integrate: b < a");
  if (a == b) return 0.0;
  return detail::adaptive(f, a, b, abs_tol, rel_tol, 48);
}

// Integrates f over (a, infinity) via z = a/t, t in (0, 1].  Requires a > 0
// and an integrand decaying fast enough that t -> f(a/t) a/t^2 stays bounded.
template <class F>
double integrate_to_inf(const F& f, double a, double abs_tol = 1e-12,
                        double rel_tol = 1e-10) {
  if (!(a > 0.0)) throw std::invalid_argument("integrate_to_inf: a must be > 0");
  auto sub = [&](double t) {
    const double z = a / t;
    return f(z) * z / t;
  };
  return detail::adaptive(sub, 0.0, 1.0, abs_tol, rel_tol, 48);
}

}  // namespace fracdeg::quad
