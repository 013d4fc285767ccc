#include "fracdeg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "fracdeg/presets.hpp"
#include "fracdeg/quadrature.hpp"

namespace fracdeg::analysis {

namespace {

double interior_max(const grid::GridFunction& u) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= u.grid.n_interior(); ++i) m = std::max(m, u.at(i));
  return m;
}

double interior_min(const grid::GridFunction& u) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= u.grid.n_interior(); ++i) m = std::min(m, u.at(i));
  return m;
}

double interior_sup_abs(const grid::GridFunction& u) {
  return std::max(std::abs(interior_max(u)), std::abs(interior_min(u)));
}

double interior_sup_diff(const grid::GridFunction& p, const grid::GridFunction& q) {
  double d = 0.0;
  for (int i = 1; i <= p.grid.n_interior(); ++i)
    d = std::max(d, std::abs(p.at(i) - q.at(i)));
  return d;
}

struct Regression {
  double slope = 0.0, intercept = 0.0, r2 = 1.0;
};

Regression fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t m = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t j = 0; j < m; ++j) {
    mx += x[j];
    my += y[j];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t j = 0; j < m; ++j) {
    sxx += (x[j] - mx) * (x[j] - mx);
    sxy += (x[j] - mx) * (y[j] - my);
    syy += (y[j] - my) * (y[j] - my);
  }
  Regression r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return r;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) {
    for (int i = 0; i < n; ++i) p[i] = i;
  }
  int find(int a) { return p[a] == a ? a : p[a] = find(p[a]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

// One-sided weighted datum mass: integral over (c, inf) of
// |g(sign * t)| / (1 + t^{1+2s}) dt.
double weighted_side_mass(const grid::ExteriorData& g, double s, double c,
                          double sign) {
  auto w = [&](double t) {
    return std::abs(g.eval(sign * t)) /
           (1.0 + std::pow(std::abs(t), 1.0 + 2.0 * s));
  };
  const double cut = std::max(2.0 * std::abs(c) + 2.0, 2.0);
  return quad::integrate(w, c, cut, 1e-9, 1e-8) +
         quad::integrate_to_inf(w, cut, 1e-9, 1e-8);
}

}  // namespace

double oracle_us(double s, double x) { return presets::us_exact(s, x); }

// ---------------------------------------------------------------------------
// Exponent machinery

double find_critical_point(const grid::GridFunction& u) {
  const grid::Grid1D& g = u.grid;
  const int n = g.n_interior();
  if (n < 3) throw std::invalid_argument("too few interior nodes");
  const std::vector<double> d = grid::gradient_central(u);
  const double mid = 0.5 * (g.a() + g.b());

  int best = 1;
  for (int i = 2; i <= n; ++i) {
    const double cur = std::abs(d[i - 1]), ref = std::abs(d[best - 1]);
    if (cur < ref - 1e-15 ||
        (cur <= ref + 1e-15 &&
         std::abs(g.x(i) - mid) < std::abs(g.x(best) - mid)))
      best = i;
  }

  // Prefer an actual sign change of the gradient when one exists: linear
  // interpolation gives an off-node critical point.
  double cross = std::numeric_limits<double>::quiet_NaN();
  double cross_dist = std::numeric_limits<double>::infinity();
  for (int i = 1; i < n; ++i) {
    const double dl = d[i - 1], dr = d[i];
    if (dl == 0.0 || dl * dr < 0.0) {
      const double t = dl == 0.0 ? 0.0 : dl / (dl - dr);
      const double xc = g.x(i) + t * g.h();
      const double dist = std::abs(xc - g.x(best));
      if (dist < cross_dist ||
          (dist == cross_dist && std::abs(xc - mid) < std::abs(cross - mid))) {
        cross = xc;
        cross_dist = dist;
      }
    }
  }
  return std::isnan(cross) ? g.x(best) : cross;
}

std::vector<double> geometric_radii(double r0, double ratio, int count) {
  if (!(r0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < 1)
    throw std::invalid_argument("need r0 > 0, ratio in (0,1), count >= 1");
  std::vector<double> r(count);
  double v = r0;
  for (int j = 0; j < count; ++j, v *= ratio) r[j] = v;
  return r;
}

ExponentFit fit_exponent(const grid::GridFunction& u, double center,
                         const std::vector<double>& radii) {
  const grid::Grid1D& g = u.grid;
  for (size_t j = 1; j < radii.size(); ++j)
    if (!(radii[j] < radii[j - 1]))
      throw std::invalid_argument("radii must be strictly decreasing");

  std::vector<double> lx, ly, used;
  for (const double r : radii) {
    if (!(r > 0.0)) continue;
    if (center - r <= g.a() || center + r >= g.b()) continue;  // leaves domain
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double r_actual = 0.0;
    int count = 0;
    for (int i = 1; i <= g.n_interior(); ++i) {
      const double dx = std::abs(g.x(i) - center);
      if (dx <= r * (1.0 + 1e-12)) {
        lo = std::min(lo, u.at(i));
        hi = std::max(hi, u.at(i));
        r_actual = std::max(r_actual, dx);
        ++count;
      }
    }
    const double osc = hi - lo;
    if (count < 3 || !(osc > 0.0) || !(r_actual > 0.0)) continue;
    lx.push_back(std::log(r_actual));
    ly.push_back(std::log(osc));
    used.push_back(r);
  }
  if (lx.size() < 4)
    throw std::invalid_argument("fewer than 4 usable radii for the exponent fit");

  const Regression reg = fit_line(lx, ly);
  ExponentFit fit;
  fit.center = center;
  fit.radii = used;
  fit.slope = reg.slope;
  fit.alpha_hat = reg.slope - 1.0;
  fit.r2 = reg.r2;
  return fit;
}

// ---------------------------------------------------------------------------
// Power calibration

PowerCalibration calibrate_power_constant(double gamma, double s, int n_probe,
                                          double r_trunc, double r_far) {
  if (!(gamma > 0.0))
    throw std::invalid_argument(
        "gamma must be positive (gamma = 0 puts the power at the 2s boundary)");
  if (!(s > 0.5 && s < 1.0))
    throw std::invalid_argument(
        "order s must lie in (1/2, 1) for an admissible power datum");
  const double beta = (2.0 * s + gamma) / (1.0 + gamma);
  if (n_probe % 2 != 0) ++n_probe;  // keep the origin off the lattice

  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, n_probe, r_trunc);
  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, s, r_far);
  grid::ExteriorData datum = presets::datum_power(1.0, beta);
  const double tol =
      std::max(0.5, 2.0 * nonlocal::tail_remainder_bound(op, datum, 1.0));
  const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, datum, tol);
  const grid::GridFunction u = grid::sample_function(
      g, [beta](double x) { return std::pow(std::abs(x), beta); }, datum);
  const nonlocal::FracLaplacian F(g, op, tail);
  const std::vector<double> Au = F.apply_fast(u);

  const double probes[] = {0.2, 0.4, 0.6};
  double kmin = std::numeric_limits<double>::infinity(), kmax = -kmin, ksum = 0.0;
  for (const double xp : probes) {
    const int i = std::clamp(static_cast<int>(std::llround((xp - g.a()) / g.h())),
                             1, g.n_interior());
    const double kap = Au[i - 1] / std::pow(std::abs(g.x(i)), beta - 2.0 * s);
    kmin = std::min(kmin, kap);
    kmax = std::max(kmax, kap);
    ksum += kap;
  }
  PowerCalibration cal;
  cal.beta = beta;
  cal.kappa = ksum / 3.0;
  cal.spread = (kmax - kmin) / std::abs(cal.kappa);
  if (!(cal.kappa > 0.0) || cal.spread > 0.01)
    throw std::runtime_error(
        "power calibration failed: probe points disagree on the homogeneity "
        "constant");
  cal.C = std::pow(std::pow(beta, gamma) * cal.kappa, -1.0 / (1.0 + gamma));
  return cal;
}

// ---------------------------------------------------------------------------
// Structural checks

Verdict check_comparison(const solver::Solution& lo, const solver::Solution& hi,
                         double residual_tol) {
  if (!grid::same_grid(lo.u.grid, hi.u.grid))
    throw std::invalid_argument("comparison requires a shared grid");
  const grid::Grid1D& g = lo.u.grid;
  double worst = -std::numeric_limits<double>::infinity();
  double where = g.a();
  for (int i = 1; i <= g.n_interior(); ++i) {
    const double v = lo.u.at(i) - hi.u.at(i);
    if (v > worst) {
      worst = v;
      where = g.x(i);
    }
  }
  Verdict out;
  out.margin = worst;
  out.pass = worst <= 10.0 * residual_tol;
  char buf[128];
  std::snprintf(buf, sizeof buf, "max(lo - hi) = %.3e at x = %.6f", worst, where);
  out.detail = buf;
  return out;
}

Verdict check_strong_max(const solver::Solution& u, const grid::ExteriorData& g,
                         double r_far, double tol) {
  const grid::Grid1D& gr = u.u.grid;
  double ext_sup = -std::numeric_limits<double>::infinity();
  for (int k = gr.k_min(); k <= gr.k_max(); ++k)
    if (!gr.is_interior(k)) ext_sup = std::max(ext_sup, u.u.at(k));
  const double r0 = std::max(std::abs(gr.a()), std::abs(gr.b()));
  const int P = 256;
  for (int j = 0; j < P; ++j) {
    const double r = r0 * std::pow(r_far / r0, static_cast<double>(j) / (P - 1));
    ext_sup = std::max({ext_sup, g.eval(r), g.eval(-r)});
  }

  const double imax = interior_max(u.u);
  Verdict out;
  if (imax < ext_sup - 1e-9 * (1.0 + std::abs(ext_sup))) {
    out.pass = true;
    out.margin = imax - ext_sup;  // negative slack
    out.detail = "vacuous: interior maximum stays below the exterior supremum";
    return out;
  }
  const double osc = imax - interior_min(u.u);
  out.margin = osc;
  out.pass = osc <= tol;
  out.detail = "interior maximum reaches the datum supremum; oscillation = " +
               std::to_string(osc);
  return out;
}

double check_linf_bound(const solver::Solution& sol, const std::vector<double>& f,
                        const grid::ExteriorData& g, double s) {
  const grid::Grid1D& gr = sol.u.grid;
  double fmax = 0.0;
  for (const double v : f) fmax = std::max(fmax, std::abs(v));

  const double width = 0.1 * (gr.b() - gr.a());
  double near = 0.0;
  const int P = 257;
  for (int j = 0; j < P; ++j) {
    const double t = width * static_cast<double>(j) / (P - 1);
    near = std::max({near, std::abs(g.eval(gr.a() - t)),
                     std::abs(g.eval(gr.b() + t))});
  }
  const double mass = weighted_side_mass(g, s, gr.b(), 1.0) +
                      weighted_side_mass(g, s, -gr.a(), -1.0);
  return interior_sup_abs(sol.u) / (1.0 + fmax + near + mass);
}

double pucci_barrier_sup(double M, double s, double lambda_ell,
                         double Lambda_ell, int n, double r_trunc,
                         double r_far) {
  if (!(M > 1.0)) throw std::invalid_argument("barrier width M must exceed 1");
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, n, r_trunc);
  const nonlocal::OperatorSpec op =
      nonlocal::build_operator(g, s, r_far, lambda_ell, Lambda_ell);
  auto phi = [M](double x) { return std::max(M * M - x * x, 0.0); };
  grid::ExteriorData datum;
  datum.eval = phi;
  datum.growth_M = M * M;
  datum.growth_sigma = 0.1;
  const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, datum);
  const grid::GridFunction u = grid::sample_function(g, phi, datum);
  const std::vector<double> mp = nonlocal::apply_pucci(u, op, tail,
                                                       nonlocal::Pucci::plus);
  return *std::max_element(mp.begin(), mp.end());
}

// ---------------------------------------------------------------------------
// Multiplicity experiments

const char* case_name(CaseId c) {
  switch (c) {
    case CaseId::figure1: return "figure1";
    case CaseId::two_solutions: return "two_solutions";
    case CaseId::four_solutions: return "four_solutions";
    case CaseId::linear_unique: return "linear_unique";
  }
  return "unknown";
}

CaseId case_from_name(const std::string& name) {
  if (name == "figure1") return CaseId::figure1;
  if (name == "two_solutions") return CaseId::two_solutions;
  if (name == "four_solutions") return CaseId::four_solutions;
  if (name == "linear_unique") return CaseId::linear_unique;
  throw std::invalid_argument("unknown experiment case: " + name);
}

grid::ExteriorData case_datum(CaseId c, double s) {
  switch (c) {
    case CaseId::figure1: return presets::datum_figure1(s);
    case CaseId::two_solutions: return presets::datum_two_solutions();
    case CaseId::four_solutions: return presets::datum_four_solutions();
    case CaseId::linear_unique: return presets::datum_linear(1.0, 0.0);
  }
  throw std::invalid_argument("unknown experiment case");
}

bool MultiplicityReport::all_pass() const {
  for (const Assertion& a : assertions)
    if (!a.pass) return false;
  return true;
}

const Candidate* MultiplicityReport::find(const std::string& label) const {
  for (const Candidate& c : candidates)
    if (c.label == label) return &c;
  return nullptr;
}

double MultiplicityReport::distance(const std::string& la,
                                    const std::string& lb) const {
  int ia = -1, ib = -1;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].label == la) ia = static_cast<int>(i);
    if (candidates[i].label == lb) ib = static_cast<int>(i);
  }
  if (ia < 0 || ib < 0)
    throw std::invalid_argument("no such candidate label in the report");
  return pairwise_sup_distances[ia][ib];
}

MultiplicityReport run_multiplicity_experiment(CaseId case_id, double s,
                                               double gamma,
                                               const grid::Grid1D& g,
                                               const solver::SolverConfig& cfg_in,
                                               double r_far,
                                               const std::string& output_dir) {
  solver::SolverConfig cfg = cfg_in;
  cfg.gamma = gamma;
  solver::validate(cfg);

  MultiplicityReport rep;
  rep.case_id = case_id;
  rep.s = s;
  rep.gamma = gamma;
  rep.n = g.n_interior();

  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, s, r_far);
  grid::ExteriorData datum = case_datum(case_id, s);
  const double r0 = std::max(std::abs(g.a()), std::abs(g.b()));
  const double tail_tol =
      std::max(0.5, 2.0 * nonlocal::tail_remainder_bound(op, datum, r0));
  const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, datum, tail_tol);
  const nonlocal::FracLaplacian F(g, op, tail);
  const solver::DirichletSolver dirichlet(g, op);
  const std::vector<double> f0(g.n_interior(), 0.0);

  auto push_solution = [&](const std::string& label, solver::Solution sol) {
    Candidate c;
    c.label = label;
    c.residual = solver::residual_degenerate(sol.u, F, f0, gamma);
    c.sol = std::move(sol);
    rep.candidates.push_back(std::move(c));
  };
  auto push_profile = [&](const std::string& label,
                          const std::function<double(double)>& fn) {
    solver::Solution sol;
    sol.u = grid::sample_function(g, fn, tail.g);
    sol.kind = solver::Kind::degenerate;
    sol.iterations = 0;
    sol.converged = true;
    sol.residual_sup = solver::residual_degenerate(sol.u, F, f0, gamma);
    push_solution(label, std::move(sol));
  };

  switch (case_id) {
    case CaseId::figure1: {
      push_solution("s_harmonic", dirichlet.solve_linear(tail, f0));
      const double vs = std::pow(2.0, s);
      push_profile("constant", [vs](double) { return vs; });
      push_solution("maximal", dirichlet.extremal(tail, solver::Kind::maximal, cfg));
      push_solution("minimal", dirichlet.extremal(tail, solver::Kind::minimal, cfg));
      break;
    }
    case CaseId::two_solutions: {
      push_profile("zero_extension", [](double) { return 0.0; });
      push_solution("s_harmonic", dirichlet.solve_linear(tail, f0));
      push_solution("minimal", dirichlet.extremal(tail, solver::Kind::minimal, cfg));
      push_solution("maximal", dirichlet.extremal(tail, solver::Kind::maximal, cfg));
      break;
    }
    case CaseId::four_solutions: {
      push_profile("zero_extension", [](double) { return 0.0; });
      push_solution("s_harmonic", dirichlet.solve_linear(tail, f0));
      push_solution("maximal", dirichlet.extremal(tail, solver::Kind::maximal, cfg));
      push_solution("minimal", dirichlet.extremal(tail, solver::Kind::minimal, cfg));
      break;
    }
    case CaseId::linear_unique: {
      push_solution("s_harmonic", dirichlet.solve_linear(tail, f0));
      push_solution("maximal", dirichlet.extremal(tail, solver::Kind::maximal, cfg));
      push_solution("minimal", dirichlet.extremal(tail, solver::Kind::minimal, cfg));
      break;
    }
  }

  const int m = static_cast<int>(rep.candidates.size());
  rep.pairwise_sup_distances.assign(m, std::vector<double>(m, 0.0));
  UnionFind uf(m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const double d =
          interior_sup_diff(rep.candidates[i].sol.u, rep.candidates[j].sol.u);
      rep.pairwise_sup_distances[i][j] = rep.pairwise_sup_distances[j][i] = d;
      if (d < rep.dist_tol) uf.unite(i, j);
    }
  rep.distinct_count = 0;
  for (int i = 0; i < m; ++i)
    if (uf.find(i) == i) ++rep.distinct_count;

  // --- assertions common to every case
  {
    double worst = 0.0;
    bool conv = true;
    for (const Candidate& c : rep.candidates) {
      worst = std::max(worst, c.residual);
      conv = conv && c.sol.converged;
    }
    rep.assertions.push_back({"residual_bounds", worst <= rep.residual_tol, worst});
    rep.assertions.push_back({"solver_converged", conv, conv ? 0.0 : 1.0});
  }
  {
    const Candidate* up = rep.find("maximal");
    const Candidate* lo = rep.find("minimal");
    double worst = -std::numeric_limits<double>::infinity();
    for (const Candidate& c : rep.candidates) {
      for (int i = 1; i <= g.n_interior(); ++i) {
        if (up) worst = std::max(worst, c.sol.u.at(i) - up->sol.u.at(i));
        if (lo) worst = std::max(worst, lo->sol.u.at(i) - c.sol.u.at(i));
      }
    }
    rep.assertions.push_back(
        {"extremal_ordering", worst <= 2.0 * cfg.continuation_tol, worst});
  }

  // --- case-specific assertions
  switch (case_id) {
    case CaseId::figure1: {
      const Candidate* cst = rep.find("constant");
      rep.assertions.push_back(
          {"constant_residual_zero", cst->residual == 0.0, cst->residual});
      const Candidate* up = rep.find("maximal");
      double dev = 0.0;
      for (int i = 1; i <= g.n_interior(); ++i)
        dev = std::max(dev, std::abs(up->sol.u.at(i) - oracle_us(s, g.x(i))));
      rep.assertions.push_back({"maximal_meets_harmonic", dev <= 1e-2, dev});
      rep.assertions.push_back({"distinct_count_ge_2", rep.distinct_count >= 2,
                                static_cast<double>(rep.distinct_count)});
      break;
    }
    case CaseId::two_solutions: {
      const Candidate* w = rep.find("s_harmonic");
      const double wmin = interior_min(w->sol.u);
      rep.assertions.push_back({"harmonic_positive", wmin >= 1e-3, wmin});
      const Candidate* lo = rep.find("minimal");
      const double lsup = interior_sup_abs(lo->sol.u);
      rep.assertions.push_back({"minimal_small", lsup <= 1e-2, lsup});
      break;
    }
    case CaseId::four_solutions: {
      double dmin = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
          dmin = std::min(dmin, rep.pairwise_sup_distances[i][j]);
      rep.assertions.push_back(
          {"min_pairwise_distance", dmin >= rep.dist_tol, dmin});
      const Candidate* w = rep.find("s_harmonic");
      double odd = 0.0;
      for (int i = 1; i <= g.n_interior(); ++i) {
        const int j = g.n_interior() + 1 - i;  // node mirrored through 0
        odd = std::max(odd, std::abs(w->sol.u.at(i) + w->sol.u.at(j)));
      }
      rep.assertions.push_back({"harmonic_odd", odd <= 1e-6, odd});
      const double wmin = interior_min(w->sol.u), wmax = interior_max(w->sol.u);
      rep.assertions.push_back({"harmonic_sign_change", wmin < 0.0 && wmax > 0.0,
                                std::min(-wmin, wmax)});
      const Candidate* up = rep.find("maximal");
      const Candidate* lo = rep.find("minimal");
      double above = -std::numeric_limits<double>::infinity(), below = above;
      for (int i = 1; i <= g.n_interior(); ++i) {
        above = std::max(above, up->sol.u.at(i) - w->sol.u.at(i));
        below = std::max(below, w->sol.u.at(i) - lo->sol.u.at(i));
      }
      const double strict = std::min(above, below);
      rep.assertions.push_back({"strict_between", strict >= rep.dist_tol, strict});
      break;
    }
    case CaseId::linear_unique: {
      double dmax = 0.0;
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
          dmax = std::max(dmax, rep.pairwise_sup_distances[i][j]);
      rep.assertions.push_back(
          {"unique_coincidence", dmax <= 2.0 * cfg.continuation_tol, dmax});
      break;
    }
  }

  if (!output_dir.empty()) {
    for (Candidate& c : rep.candidates) {
      c.file = output_dir + "/" + std::string(case_name(case_id)) + "_" +
               c.label + ".csv";
      grid::write_csv(c.sol.u, c.file);
    }
    write_multiplicity_json(rep, output_dir + "/" +
                                     std::string(case_name(case_id)) +
                                     "_report.json");
  }
  return rep;
}

void write_multiplicity_json(const MultiplicityReport& rep,
                             const std::string& path) {
  nlohmann::json j;
  j["case_id"] = case_name(rep.case_id);
  j["s"] = rep.s;
  j["gamma"] = rep.gamma;
  j["n"] = rep.n;
  j["dist_tol"] = rep.dist_tol;
  j["residual_tol"] = rep.residual_tol;
  j["candidates"] = nlohmann::json::array();
  for (const Candidate& c : rep.candidates)
    j["candidates"].push_back(
        {{"label", c.label}, {"residual", c.residual}, {"file", c.file}});
  j["pairwise_sup_distances"] = rep.pairwise_sup_distances;
  j["distinct_count"] = rep.distinct_count;
  j["assertions"] = nlohmann::json::array();
  for (const Assertion& a : rep.assertions)
    j["assertions"].push_back(
        {{"name", a.name}, {"pass", a.pass}, {"margin", a.margin}});
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

Verdict check_touching_criteria(const MultiplicityReport& rep,
                                double continuation_tol) {
  const double touch_tol = 5.0 * continuation_tol;
  const Candidate* up = rep.find("maximal");
  const Candidate* lo = rep.find("minimal");
  const Candidate* w = rep.find("s_harmonic");
  Verdict out;
  out.margin = 0.0;
  out.detail = "no touching detected";

  auto gap_min = [&](const Candidate* a, const Candidate* b) {
    double m = std::numeric_limits<double>::infinity();
    const grid::Grid1D& g = a->sol.u.grid;
    for (int i = 1; i <= g.n_interior(); ++i)
      m = std::min(m, a->sol.u.at(i) - b->sol.u.at(i));
    return m;
  };
  auto require_close = [&](const Candidate* a, const Candidate* b,
                           const std::string& what) {
    const double d = interior_sup_diff(a->sol.u, b->sol.u);
    const double excess = d - 10.0 * touch_tol;
    if (excess > out.margin) out.margin = excess;
    if (excess > 0.0) {
      out.pass = false;
      out.detail = what + " touch but differ by " + std::to_string(d);
    } else if (out.detail == "no touching detected") {
      out.detail = what + " touch and coincide";
    }
  };

  if (up && w && gap_min(up, w) <= touch_tol)
    require_close(up, w, "maximal and harmonic");
  if (lo && w && gap_min(w, lo) <= touch_tol)
    require_close(w, lo, "harmonic and minimal");
  if (up && lo && gap_min(up, lo) <= touch_tol) {
    require_close(up, lo, "maximal and minimal");
    if (w) {
      require_close(up, w, "maximal and harmonic");
      require_close(w, lo, "harmonic and minimal");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stability

StabilityReport stability_experiment(const grid::ExteriorData& g,
                                     const std::vector<grid::ExteriorData>& perturbed,
                                     const grid::Grid1D& gr,
                                     const nonlocal::OperatorSpec& op,
                                     const solver::SolverConfig& cfg) {
  const solver::DirichletSolver dirichlet(gr, op);
  const double r0 = std::max(std::abs(gr.a()), std::abs(gr.b()));
  auto tail_of = [&](const grid::ExteriorData& d) {
    const double tol =
        std::max(0.5, 2.0 * nonlocal::tail_remainder_bound(op, d, r0));
    return nonlocal::make_tail(gr, op, d, tol);
  };
  const solver::Solution base =
      dirichlet.extremal(tail_of(g), solver::Kind::maximal, cfg);

  StabilityReport rep;
  for (const grid::ExteriorData& gk : perturbed) {
    const solver::Solution uk =
        dirichlet.extremal(tail_of(gk), solver::Kind::maximal, cfg);
    rep.distances.push_back(interior_sup_diff(uk.u, base.u));
  }
  for (size_t k = 1; k < rep.distances.size(); ++k)
    if (rep.distances[k] > rep.distances[k - 1] + 1e-12)
      rep.decreasing = false;
  rep.final_distance = rep.distances.empty() ? 0.0 : rep.distances.back();
  return rep;
}

// ---------------------------------------------------------------------------
// Structural suite

namespace {

grid::ExteriorData random_bounded_datum(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double c0 = 2.0 * U(rng) - 1.0;
  const double a1 = 0.5 * U(rng), a2 = 0.5 * U(rng);
  const double w1 = 0.5 + 2.5 * U(rng), w2 = 0.5 + 2.5 * U(rng);
  const double p1 = 2.0 * std::numbers::pi * U(rng);
  const double p2 = 2.0 * std::numbers::pi * U(rng);
  grid::ExteriorData g;
  g.eval = [=](double x) {
    return c0 + a1 * std::sin(w1 * x + p1) + a2 * std::cos(w2 * x + p2);
  };
  g.growth_M = std::abs(c0) + a1 + a2 + 0.1;
  g.growth_sigma = 0.1;
  return g;
}

grid::ExteriorData lift_datum(const grid::ExteriorData& g, double gap,
                              double ripple, double freq, double phase) {
  grid::ExteriorData out;
  const auto base = g.eval;
  out.eval = [=](double x) {
    return base(x) + gap + 0.5 * ripple * (1.0 + std::sin(freq * x + phase));
  };
  out.growth_M = g.growth_M + gap + ripple;
  out.growth_sigma = g.growth_sigma;
  return out;
}

}  // namespace

StructuralReport run_structural_suite(std::uint64_t seed, int n_pairs,
                                      const solver::SolverConfig& cfg) {
  solver::validate(cfg);
  StructuralReport rep;
  rep.seed = seed;
  rep.linf_constant = 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);

  const double r_trunc = 8.0, r_far = 1e4;
  const int n = 200;
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, n, r_trunc);
  const double s_main = 0.75;
  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, s_main, r_far);
  const solver::DirichletSolver dirichlet(g, op);
  const std::vector<double> f0(n, 0.0);

  auto note_ratio = [&](const solver::Solution& sol, const std::vector<double>& f,
                        const grid::ExteriorData& datum, double s) {
    const double r = check_linf_bound(sol, f, datum, s);
    rep.linf_max_ratio = std::max(rep.linf_max_ratio, r);
  };
  auto note_strong_max = [&](const solver::Solution& sol,
                             const grid::ExteriorData& datum) {
    const Verdict v = check_strong_max(sol, datum, r_far,
                                       10.0 * cfg.residual_tol);
    rep.strong_max_all = rep.strong_max_all && v.pass;
    ++rep.strong_max_checks;
  };

  // Seeded random ordered data pairs under f = +1 / f = -1.
  rep.comparison_pairs = n_pairs;
  rep.comparison_worst = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_pairs; ++p) {
    const grid::ExteriorData glo = random_bounded_datum(rng);
    const double gap = 0.2 + 0.8 * U(rng);
    const double ripple = 0.5 * gap * U(rng);
    const double freq = 0.5 + 2.5 * U(rng);
    const double phase = 2.0 * std::numbers::pi * U(rng);
    const grid::ExteriorData ghi = lift_datum(glo, gap, ripple, freq, phase);
    const std::vector<double> f(n, p % 2 == 0 ? 1.0 : -1.0);
    const solver::Solution ulo =
        dirichlet.vanishing_viscosity(nonlocal::make_tail(g, op, glo), f, cfg);
    const solver::Solution uhi =
        dirichlet.vanishing_viscosity(nonlocal::make_tail(g, op, ghi), f, cfg);
    const Verdict v = check_comparison(ulo, uhi, cfg.residual_tol);
    rep.comparison_all = rep.comparison_all && v.pass;
    rep.comparison_worst = std::max(rep.comparison_worst, v.margin);
    note_ratio(ulo, f, glo, s_main);
    note_ratio(uhi, f, ghi, s_main);
  }

  // Constant datum: the binding branch of the strong maximum principle.
  {
    const grid::ExteriorData gc = presets::datum_constant(0.7);
    const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, gc);
    const solver::Solution u = dirichlet.solve_linear(tail, f0);
    note_strong_max(u, gc);
    note_ratio(u, f0, gc, s_main);
  }

  // Harmonic profile family across orders; strong-max is vacuous (the datum
  // grows), the interest is the shared L-infinity ratio.
  for (const double s : {0.6, 0.75, 0.9}) {
    const nonlocal::OperatorSpec ops = nonlocal::build_operator(g, s, r_far);
    const solver::DirichletSolver ds(g, ops);
    const grid::ExteriorData datum = presets::datum_figure1(s);
    const nonlocal::TailSpec tail = nonlocal::make_tail(g, ops, datum);
    const solver::Solution u = ds.solve_linear(tail, f0);
    note_strong_max(u, datum);
    note_ratio(u, f0, datum, s);
  }

  // Large forcing against a zero datum.
  {
    const grid::ExteriorData gz = presets::datum_constant(0.0);
    const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, gz);
    const std::vector<double> f10(n, 10.0);
    const solver::Solution u = dirichlet.vanishing_viscosity(tail, f10, cfg);
    note_ratio(u, f10, gz, s_main);
  }

  // Extremal ordering on random data.
  rep.ordering_worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 2; ++t) {
    const grid::ExteriorData datum = random_bounded_datum(rng);
    const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, datum);
    const solver::Solution w = dirichlet.solve_linear(tail, f0);
    const solver::Solution up = dirichlet.extremal(tail, solver::Kind::maximal, cfg);
    const solver::Solution lo = dirichlet.extremal(tail, solver::Kind::minimal, cfg);
    for (int i = 1; i <= n; ++i) {
      rep.ordering_worst = std::max(rep.ordering_worst,
                                    std::max(w.u.at(i) - up.u.at(i),
                                             lo.u.at(i) - w.u.at(i)));
    }
    for (const solver::Solution* sol : {&w, &up, &lo}) {
      note_strong_max(*sol, datum);
      note_ratio(*sol, f0, datum, s_main);
    }
  }
  rep.ordering_ok = rep.ordering_worst <= 2.0 * cfg.continuation_tol;

  // Barrier negativity across orders.
  for (const double s : {0.6, 0.75, 0.9}) {
    const double sup = pucci_barrier_sup(4.0, s, 1.0, 2.0, 400, r_trunc, r_far);
    rep.barrier_sup.push_back(sup);
    rep.barrier_ok = rep.barrier_ok && sup < 0.0;
  }

  rep.linf_ok = rep.linf_max_ratio <= rep.linf_constant;
  return rep;
}

void write_structural_json(const StructuralReport& rep, const std::string& path) {
  nlohmann::json j;
  j["seed"] = rep.seed;
  j["comparison_pairs"] = rep.comparison_pairs;
  j["comparison_all"] = rep.comparison_all;
  j["comparison_worst"] = rep.comparison_worst;
  j["strong_max_all"] = rep.strong_max_all;
  j["strong_max_checks"] = rep.strong_max_checks;
  j["linf_constant"] = rep.linf_constant;
  j["linf_max_ratio"] = rep.linf_max_ratio;
  j["linf_ok"] = rep.linf_ok;
  j["barrier_sup"] = rep.barrier_sup;
  j["barrier_ok"] = rep.barrier_ok;
  j["ordering_worst"] = rep.ordering_worst;
  j["ordering_ok"] = rep.ordering_ok;
  j["all_pass"] = rep.all_pass();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

}  // namespace fracdeg::analysis
