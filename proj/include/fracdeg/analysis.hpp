#pragma once

// Closed-form oracles, regularity-exponent estimation, structural property
// checks (comparison, strong maximum, uniform bound, barrier), and the
// multiplicity / stability experiment drivers with JSON reports.

#include <cstdint>
#include <string>
#include <vector>

#include "fracdeg/grid.hpp"
#include "fracdeg/operator.hpp"
#include "fracdeg/solver.hpp"

namespace fracdeg::analysis {

// (1+x)_+^s + (1-x)_+^s, the explicit harmonic profile used as reference.
double oracle_us(double s, double x);

// ---------------------------------------------------------------------------
// Regularity exponent

struct ExponentFit {
  double center = 0.0;
  std::vector<double> radii;  // strictly decreasing, windows inside the domain
  double slope = 0.0;         // fitted exponent of the oscillation, 1 + alpha
  double alpha_hat = 0.0;
  double r2 = 0.0;            // regression quality in [0, 1]
};

// Discrete critical point: node minimizing |D_h u|, refined by the linear
// zero crossing of the gradient when one exists nearby; ties break toward
// the interval midpoint.  The result need not be a node.
double find_critical_point(const grid::GridFunction& u);

// Regresses log(oscillation of u over the window |x - center| <= r) against
// log r; requires at least four usable radii.
ExponentFit fit_exponent(const grid::GridFunction& u, double center,
                         const std::vector<double>& radii);

// Default window ladder r0 * ratio^j, j = 0..count-1.
std::vector<double> geometric_radii(double r0, double ratio, int count);

// ---------------------------------------------------------------------------
// Power-solution calibration

struct PowerCalibration {
  double C = 0.0;      // scale with |D(C|x|^beta)|^gamma * op = 1
  double beta = 0.0;   // (2s + gamma) / (1 + gamma)
  double kappa = 0.0;  // homogeneity constant of the operator on |x|^beta
  double spread = 0.0; // relative disagreement of kappa across probe points
};

// Applies the operator to |x|^beta on a fine probe grid and extracts the
// homogeneity constant kappa from probe points away from the origin; the
// probes must agree to 1% or the calibration throws.
PowerCalibration calibrate_power_constant(double gamma, double s,
                                          int n_probe = 16000,
                                          double r_trunc = 8.0,
                                          double r_far = 1e4);

// ---------------------------------------------------------------------------
// Structural checks

struct Verdict {
  bool pass = true;
  double margin = 0.0;  // worst violation (positive = amount of failure)
  std::string detail;
};

// lo, hi must share a grid and ordered exterior data; true iff
// lo <= hi + 10 * residual_tol at every interior node.
Verdict check_comparison(const solver::Solution& lo, const solver::Solution& hi,
                         double residual_tol);

// If the interior maximum reaches the sup of the datum over the exterior
// (sampled out to r_far), the solution must be constant to within tol;
// otherwise the verdict is vacuously true.
Verdict check_strong_max(const solver::Solution& u, const grid::ExteriorData& g,
                         double r_far, double tol);

// ||u||_inf / (1 + ||f||_inf + sup of |g| near the boundary + integral of
// |g(y)| (1+|y|^{1+2s})^{-1} outside the domain).
double check_linf_bound(const solver::Solution& u, const std::vector<double>& f,
                        const grid::ExteriorData& g, double s);

// sup over the unit ball of M+ applied to (M^2 - x^2)_+ with ellipticity
// (lambda, Lambda); the barrier property requires a negative value.
double pucci_barrier_sup(double M, double s, double lambda_ell,
                         double Lambda_ell, int n, double r_trunc,
                         double r_far);

// ---------------------------------------------------------------------------
// Multiplicity experiments

enum class CaseId { figure1, two_solutions, four_solutions, linear_unique };
const char* case_name(CaseId c);
CaseId case_from_name(const std::string& name);

// The exterior datum of each case (figure1 depends on s, linear_unique is
// x -> x, the others are the ramp data).
grid::ExteriorData case_datum(CaseId c, double s);

struct Candidate {
  std::string label;
  solver::Solution sol;
  double residual = 0.0;  // residual of the degenerate equation with f = 0
  std::string file;       // CSV path when written to output_dir
};

struct Assertion {
  std::string name;
  bool pass = true;
  double margin = 0.0;
};

struct MultiplicityReport {
  CaseId case_id = CaseId::figure1;
  double s = 0.0, gamma = 0.0;
  int n = 0;
  double dist_tol = 1e-2;
  double residual_tol = 1e-4;  // every candidate must satisfy this
  std::vector<Candidate> candidates;
  std::vector<std::vector<double>> pairwise_sup_distances;
  int distinct_count = 0;
  std::vector<Assertion> assertions;

  bool all_pass() const;
  const Candidate* find(const std::string& label) const;
  double distance(const std::string& la, const std::string& lb) const;
};

MultiplicityReport run_multiplicity_experiment(CaseId case_id, double s,
                                               double gamma,
                                               const grid::Grid1D& grid,
                                               const solver::SolverConfig& cfg,
                                               double r_far = 1e4,
                                               const std::string& output_dir = "");

void write_multiplicity_json(const MultiplicityReport& rep,
                             const std::string& path);

// Touching criteria: an extremal solution that meets the harmonic candidate
// (or the opposite extremal) must coincide with it.
Verdict check_touching_criteria(const MultiplicityReport& rep,
                                double continuation_tol);

// ---------------------------------------------------------------------------
// Stability of the maximal solution under datum perturbations

struct StabilityReport {
  std::vector<double> distances;  // ||ubar_k - ubar||_inf per perturbation
  bool decreasing = true;
  double final_distance = 0.0;
};

StabilityReport stability_experiment(const grid::ExteriorData& g,
                                     const std::vector<grid::ExteriorData>& perturbed,
                                     const grid::Grid1D& grid,
                                     const nonlocal::OperatorSpec& op,
                                     const solver::SolverConfig& cfg);

// ---------------------------------------------------------------------------
// Structural acceptance suite: seeded random comparison pairs, strong-max
// checks on every homogeneous run, uniform-bound ratios, the barrier, and
// extremal ordering.

struct StructuralReport {
  std::uint64_t seed = 0;
  int comparison_pairs = 0;
  bool comparison_all = true;
  double comparison_worst = 0.0;  // worst ordering violation seen
  bool strong_max_all = true;
  int strong_max_checks = 0;
  double linf_constant = 0.0;     // the single pinned constant
  double linf_max_ratio = 0.0;
  bool linf_ok = true;
  std::vector<double> barrier_sup;  // one entry per order s tested
  bool barrier_ok = true;
  double ordering_worst = 0.0;
  bool ordering_ok = true;

  bool all_pass() const {
    return comparison_all && strong_max_all && linf_ok && barrier_ok &&
           ordering_ok;
  }
};

StructuralReport run_structural_suite(std::uint64_t seed, int n_pairs,
                                      const solver::SolverConfig& cfg);

void write_structural_json(const StructuralReport& rep, const std::string& path);

}  // namespace fracdeg::analysis
