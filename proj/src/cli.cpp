#include "fracdeg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracdeg/analysis.hpp"
#include "fracdeg/grid.hpp"
#include "fracdeg/operator.hpp"
#include "fracdeg/presets.hpp"
#include "fracdeg/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fracdeg::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConverge = 2;
constexpr int kExitAssertion = 4;

struct RunConfig {
  std::string command;

  double s = 0.75;
  double gamma = 1.0;
  int n = 2000;
  double a = -1.0, b = 1.0;
  double r_trunc = 8.0;
  double r_far = 1e4;

  std::string datum = "figure1";
  double datum_value = 1.0;      // constant level
  double datum_slope = 1.0;      // linear
  double datum_intercept = 0.0;
  double datum_scale = 1.0;      // power prefactor C
  double datum_beta = 1.25;      // power exponent
  double growth_M = -1.0;        // custom growth certificate overrides
  double growth_sigma = -1.0;
  double tail_tolerance = 0.0;   // 0 = automatic

  std::string forcing = "zero";  // zero | constant | table
  double forcing_value = 0.0;
  std::string forcing_table;

  double damping = 0.5;
  double residual_tol = 1e-8;
  int picard_max = 300;
  double continuation_tol = 1e-4;
  std::vector<double> eps_schedule;
  std::vector<double> eta_schedule;

  std::string side = "maximal";
  std::string case_id = "figure1";
  std::string suite = "structural";
  int pairs = 100;
  std::vector<int> k_list = {1, 2, 4, 8, 16};
  int n_probe = 16000;
  bool sweep = false;
  double fit_r0 = 0.4;
  double fit_ratio = 0.7;
  int fit_count = 10;
  std::vector<int> bench_ns = {1000, 2000, 4000};
  int bench_reps = 5;

  std::uint64_t seed = 12345;
  std::string output_dir = "out";
};

void apply_json_config(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("config must be a JSON object of settings");
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "s") rc.s = val.get<double>();
      else if (key == "gamma") rc.gamma = val.get<double>();
      else if (key == "n") rc.n = val.get<int>();
      else if (key == "a") rc.a = val.get<double>();
      else if (key == "b") rc.b = val.get<double>();
      else if (key == "r_trunc") rc.r_trunc = val.get<double>();
      else if (key == "r_far") rc.r_far = val.get<double>();
      else if (key == "datum") rc.datum = val.get<std::string>();
      else if (key == "datum_value") rc.datum_value = val.get<double>();
      else if (key == "datum_slope") rc.datum_slope = val.get<double>();
      else if (key == "datum_intercept") rc.datum_intercept = val.get<double>();
      else if (key == "datum_scale") rc.datum_scale = val.get<double>();
      else if (key == "datum_beta") rc.datum_beta = val.get<double>();
      else if (key == "growth_M") rc.growth_M = val.get<double>();
      else if (key == "growth_sigma") rc.growth_sigma = val.get<double>();
      else if (key == "tail_tolerance") rc.tail_tolerance = val.get<double>();
      else if (key == "forcing") rc.forcing = val.get<std::string>();
      else if (key == "forcing_value") rc.forcing_value = val.get<double>();
      else if (key == "forcing_table") rc.forcing_table = val.get<std::string>();
      else if (key == "damping") rc.damping = val.get<double>();
      else if (key == "residual_tol") rc.residual_tol = val.get<double>();
      else if (key == "picard_max") rc.picard_max = val.get<int>();
      else if (key == "continuation_tol") rc.continuation_tol = val.get<double>();
      else if (key == "eps_schedule") rc.eps_schedule = val.get<std::vector<double>>();
      else if (key == "eta_schedule") rc.eta_schedule = val.get<std::vector<double>>();
      else if (key == "side") rc.side = val.get<std::string>();
      else if (key == "case") rc.case_id = val.get<std::string>();
      else if (key == "suite") rc.suite = val.get<std::string>();
      else if (key == "pairs") rc.pairs = val.get<int>();
      else if (key == "k_list") rc.k_list = val.get<std::vector<int>>();
      else if (key == "n_probe") rc.n_probe = val.get<int>();
      else if (key == "sweep") rc.sweep = val.get<bool>();
      else if (key == "fit_r0") rc.fit_r0 = val.get<double>();
      else if (key == "fit_ratio") rc.fit_ratio = val.get<double>();
      else if (key == "fit_count") rc.fit_count = val.get<int>();
      else if (key == "bench_ns") rc.bench_ns = val.get<std::vector<int>>();
      else if (key == "bench_reps") rc.bench_reps = val.get<int>();
      else if (key == "seed") rc.seed = val.get<std::uint64_t>();
      else if (key == "output_dir") rc.output_dir = val.get<std::string>();
      else
        throw std::invalid_argument("unknown config key: " + key);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config field '" + key + "': " + e.what());
    }
  }
}

json config_json(const RunConfig& rc) {
  return json{{"command", rc.command},
              {"s", rc.s},
              {"gamma", rc.gamma},
              {"n", rc.n},
              {"a", rc.a},
              {"b", rc.b},
              {"r_trunc", rc.r_trunc},
              {"r_far", rc.r_far},
              {"datum", rc.datum},
              {"datum_value", rc.datum_value},
              {"datum_slope", rc.datum_slope},
              {"datum_intercept", rc.datum_intercept},
              {"datum_scale", rc.datum_scale},
              {"datum_beta", rc.datum_beta},
              {"growth_M", rc.growth_M},
              {"growth_sigma", rc.growth_sigma},
              {"tail_tolerance", rc.tail_tolerance},
              {"forcing", rc.forcing},
              {"forcing_value", rc.forcing_value},
              {"forcing_table", rc.forcing_table},
              {"damping", rc.damping},
              {"residual_tol", rc.residual_tol},
              {"picard_max", rc.picard_max},
              {"continuation_tol", rc.continuation_tol},
              {"eps_schedule", rc.eps_schedule},
              {"eta_schedule", rc.eta_schedule},
              {"side", rc.side},
              {"case", rc.case_id},
              {"suite", rc.suite},
              {"pairs", rc.pairs},
              {"k_list", rc.k_list},
              {"n_probe", rc.n_probe},
              {"sweep", rc.sweep},
              {"fit_r0", rc.fit_r0},
              {"fit_ratio", rc.fit_ratio},
              {"fit_count", rc.fit_count},
              {"bench_ns", rc.bench_ns},
              {"bench_reps", rc.bench_reps},
              {"seed", rc.seed},
              {"output_dir", rc.output_dir}};
}

void write_manifest(const RunConfig& rc) {
  std::ofstream f(rc.output_dir + "/manifest.json");
  if (!f)
    throw std::runtime_error("cannot write manifest into " + rc.output_dir);
  f << config_json(rc).dump(2) << "\n";
}

void validate_config(const RunConfig& rc) {
  if (!(rc.s > 0.0 && rc.s < 1.0))
    throw std::invalid_argument("s must lie in (0,1)");
  if (!(rc.gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  if (rc.n < 3) throw std::invalid_argument("n must be at least 3");
  if (!(rc.b > rc.a)) throw std::invalid_argument("interval needs b > a");
  const double reach = 2.0 * std::max(std::abs(rc.a), std::abs(rc.b));
  if (!(rc.r_trunc >= reach))
    throw std::invalid_argument(
        "r_trunc must be at least twice the interval radius");
  if (!(rc.r_far > rc.r_trunc))
    throw std::invalid_argument("r_far must exceed r_trunc");
  if (rc.growth_sigma > 0.0 && !(rc.growth_sigma < 2.0 * rc.s))
    throw std::invalid_argument(
        "custom growth exponent sigma must satisfy sigma < 2s (datum outside "
        "the admissible growth class)");
}

solver::SolverConfig solver_config(const RunConfig& rc) {
  solver::SolverConfig cfg;
  cfg.gamma = rc.gamma;
  cfg.eps_schedule = rc.eps_schedule;
  cfg.eta_schedule = rc.eta_schedule;
  cfg.damping = rc.damping;
  cfg.residual_tol = rc.residual_tol;
  cfg.picard_max = rc.picard_max;
  cfg.continuation_tol = rc.continuation_tol;
  solver::validate(cfg);
  return cfg;
}

grid::ExteriorData make_datum(const RunConfig& rc) {
  grid::ExteriorData g;
  if (rc.datum == "constant") g = presets::datum_constant(rc.datum_value);
  else if (rc.datum == "linear")
    g = presets::datum_linear(rc.datum_slope, rc.datum_intercept);
  else if (rc.datum == "figure1") g = presets::datum_figure1(rc.s);
  else if (rc.datum == "two_solutions") g = presets::datum_two_solutions();
  else if (rc.datum == "four_solutions") g = presets::datum_four_solutions();
  else if (rc.datum == "power")
    g = presets::datum_power(rc.datum_scale, rc.datum_beta);
  else
    throw std::invalid_argument("unknown datum preset: " + rc.datum);
  if (rc.growth_M > 0.0) g.growth_M = rc.growth_M;
  if (rc.growth_sigma > 0.0) g.growth_sigma = rc.growth_sigma;
  return g;
}

std::vector<double> make_forcing(const RunConfig& rc, const grid::Grid1D& g) {
  if (rc.forcing == "zero") return std::vector<double>(g.n_interior(), 0.0);
  if (rc.forcing == "constant")
    return std::vector<double>(g.n_interior(), rc.forcing_value);
  if (rc.forcing == "table") {
    auto tab = grid::read_table(rc.forcing_table);
    if (tab.size() < 2)
      throw std::invalid_argument("forcing table needs at least two rows");
    std::sort(tab.begin(), tab.end());
    return solver::sample_forcing(g, [&tab](double x) {
      if (x <= tab.front().first) return tab.front().second;
      if (x >= tab.back().first) return tab.back().second;
      const auto it = std::lower_bound(
          tab.begin(), tab.end(), std::make_pair(x, -1e300));
      const auto [x1, y1] = *it;
      const auto [x0, y0] = *(it - 1);
      return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    });
  }
  throw std::invalid_argument("unknown forcing preset: " + rc.forcing);
}

nonlocal::TailSpec build_tail(const RunConfig& rc, const grid::Grid1D& g,
                              const nonlocal::OperatorSpec& op,
                              const grid::ExteriorData& datum) {
  const double r0 = std::max(std::abs(g.a()), std::abs(g.b()));
  const double tol =
      rc.tail_tolerance > 0.0
          ? rc.tail_tolerance
          : std::max(0.5, 2.0 * nonlocal::tail_remainder_bound(op, datum, r0));
  return nonlocal::make_tail(g, op, datum, tol);
}

int worker_count() {
  int w = static_cast<int>(std::thread::hardware_concurrency());
  if (w < 1) w = 1;
  if (const char* e = std::getenv("FRACDEG_THREADS")) {
    const int v = std::atoi(e);
    if (v >= 1) w = v;
  }
  return w;
}

// Runs jobs[0..count) on up to worker_count() threads; each job writes only
// its own slot, so aggregated output stays deterministic.
void run_jobs(int count, const std::function<void(int)>& job) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) job(i);
    });
  for (std::thread& t : pool) t.join();
}

// ---------------------------------------------------------------------------

int cmd_harmonic(const RunConfig& rc) {
  const grid::Grid1D g = grid::build_grid(rc.a, rc.b, rc.n, rc.r_trunc);
  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, rc.s, rc.r_far);
  const nonlocal::TailSpec tail = build_tail(rc, g, op, make_datum(rc));
  const std::vector<double> f = make_forcing(rc, g);
  const solver::Solution sol =
      solver::DirichletSolver(g, op).solve_linear(tail, f);
  grid::write_csv(sol.u, rc.output_dir + "/harmonic.csv");
  solver::write_solution_json(sol, rc.s, rc.gamma, rc.r_trunc,
                              rc.output_dir + "/harmonic.json");
  std::cout << "harmonic solve: n = " << rc.n
            << ", residual_sup = " << sol.residual_sup << "\n";
  return kExitOk;
}

int cmd_solve(const RunConfig& rc) {
  const grid::Grid1D g = grid::build_grid(rc.a, rc.b, rc.n, rc.r_trunc);
  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, rc.s, rc.r_far);
  const nonlocal::TailSpec tail = build_tail(rc, g, op, make_datum(rc));
  const std::vector<double> f = make_forcing(rc, g);
  const solver::Solution sol = solver::DirichletSolver(g, op).vanishing_viscosity(
      tail, f, solver_config(rc));
  grid::write_csv(sol.u, rc.output_dir + "/solution.csv");
  solver::write_solution_json(sol, rc.s, rc.gamma, rc.r_trunc,
                              rc.output_dir + "/solution.json");
  std::cout << "degenerate solve: converged = " << (sol.converged ? "yes" : "no")
            << ", residual_sup = " << sol.residual_sup
            << ", final_eps = " << sol.final_eps << "\n";
  return sol.converged ? kExitOk : kExitNoConverge;
}

int cmd_extremal(const RunConfig& rc) {
  solver::Kind side;
  if (rc.side == "maximal") side = solver::Kind::maximal;
  else if (rc.side == "minimal") side = solver::Kind::minimal;
  else throw std::invalid_argument("side must be maximal or minimal");
  const grid::Grid1D g = grid::build_grid(rc.a, rc.b, rc.n, rc.r_trunc);
  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, rc.s, rc.r_far);
  const nonlocal::TailSpec tail = build_tail(rc, g, op, make_datum(rc));
  const solver::Solution sol =
      solver::DirichletSolver(g, op).extremal(tail, side, solver_config(rc));
  grid::write_csv(sol.u, rc.output_dir + "/" + rc.side + ".csv");
  solver::write_solution_json(sol, rc.s, rc.gamma, rc.r_trunc,
                              rc.output_dir + "/" + rc.side + ".json");
  std::cout << rc.side << " solve: converged = " << (sol.converged ? "yes" : "no")
            << ", residual_sup = " << sol.residual_sup << "\n";
  return sol.converged ? kExitOk : kExitNoConverge;
}

struct ExponentJob {
  double s = 0.0, gamma = 0.0;
  json report;
  bool pass = false;
  bool converged = false;
  std::string error;
};

void run_exponent_job(const RunConfig& rc, ExponentJob& jb) {
  try {
    const analysis::PowerCalibration cal = analysis::calibrate_power_constant(
        jb.gamma, jb.s, rc.n_probe, rc.r_trunc, rc.r_far);
    int n = rc.n;
    if (n % 2 != 0) ++n;  // keep the origin between nodes
    const grid::Grid1D g = grid::build_grid(-1.0, 1.0, n, rc.r_trunc);
    const nonlocal::OperatorSpec op = nonlocal::build_operator(g, jb.s, rc.r_far);
    grid::ExteriorData datum = presets::datum_power(cal.C, cal.beta);
    const double tol = std::max(
        0.5, 2.0 * nonlocal::tail_remainder_bound(op, datum, 1.0));
    const nonlocal::TailSpec tail = nonlocal::make_tail(g, op, datum, tol);
    solver::SolverConfig cfg = solver_config(rc);
    cfg.gamma = jb.gamma;
    const std::vector<double> f(g.n_interior(), 1.0);
    const solver::Solution sol =
        solver::DirichletSolver(g, op).vanishing_viscosity(tail, f, cfg);
    jb.converged = sol.converged;

    const double center = analysis::find_critical_point(sol.u);
    const analysis::ExponentFit fit = analysis::fit_exponent(
        sol.u, center,
        analysis::geometric_radii(rc.fit_r0, rc.fit_ratio, rc.fit_count));
    const double alpha = (2.0 * jb.s - 1.0) / (1.0 + jb.gamma);
    const double rel = std::abs(fit.alpha_hat - alpha) / alpha;
    jb.pass = rel <= 0.05;
    jb.report = json{{"s", jb.s},
                     {"gamma", jb.gamma},
                     {"n", n},
                     {"alpha_hat", fit.alpha_hat},
                     {"alpha_formula", alpha},
                     {"relative_error", rel},
                     {"slope", fit.slope},
                     {"r2", fit.r2},
                     {"center", fit.center},
                     {"radii", fit.radii},
                     {"C", cal.C},
                     {"beta", cal.beta},
                     {"kappa", cal.kappa},
                     {"kappa_spread", cal.spread},
                     {"residual_sup", sol.residual_sup},
                     {"converged", sol.converged},
                     {"pass", jb.pass}};
  } catch (const std::exception& e) {
    jb.error = e.what();
  }
}

int cmd_exponent(const RunConfig& rc) {
  std::vector<ExponentJob> jobs;
  if (rc.sweep) {
    for (const double s : {0.6, 0.75, 0.9})
      for (const double gm : {0.5, 1.0, 2.0}) jobs.push_back({s, gm});
  } else {
    jobs.push_back({rc.s, rc.gamma});
  }
  run_jobs(static_cast<int>(jobs.size()),
           [&](int i) { run_exponent_job(rc, jobs[i]); });

  bool all_pass = true, all_conv = true;
  json arr = json::array();
  for (const ExponentJob& jb : jobs) {
    if (!jb.error.empty()) {
      std::cerr << "exponent (s=" << jb.s << ", gamma=" << jb.gamma
                << ") failed: " << jb.error << "\n";
      return kExitUsage;
    }
    arr.push_back(jb.report);
    all_pass = all_pass && jb.pass;
    all_conv = all_conv && jb.converged;
    std::cout << "s=" << jb.s << " gamma=" << jb.gamma
              << " alpha_hat=" << jb.report["alpha_hat"].get<double>()
              << " target=" << jb.report["alpha_formula"].get<double>()
              << (jb.pass ? "  ok" : "  out of tolerance") << "\n";
  }
  json out = rc.sweep ? json{{"sweep", arr}, {"all_pass", all_pass}}
                      : jobs.front().report;
  const std::string name =
      rc.sweep ? "exponent_sweep.json" : "exponent_report.json";
  std::ofstream f(rc.output_dir + "/" + name);
  f << out.dump(2) << "\n";
  if (!all_conv) return kExitNoConverge;
  return all_pass ? kExitOk : kExitAssertion;
}

int cmd_multiplicity(const RunConfig& rc) {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, rc.n, rc.r_trunc);
  const analysis::CaseId cid = analysis::case_from_name(rc.case_id);
  const analysis::MultiplicityReport rep = analysis::run_multiplicity_experiment(
      cid, rc.s, rc.gamma, g, solver_config(rc), rc.r_far, rc.output_dir);
  const analysis::Verdict touching =
      analysis::check_touching_criteria(rep, rc.continuation_tol);
  std::cout << "case " << rc.case_id << ": distinct_count = "
            << rep.distinct_count << ", touching: " << touching.detail << "\n";
  bool conv = true;
  for (const analysis::Candidate& c : rep.candidates) conv &= c.sol.converged;
  for (const analysis::Assertion& a : rep.assertions)
    std::cout << "  " << (a.pass ? "pass" : "FAIL") << "  " << a.name
              << "  (margin " << a.margin << ")\n";
  if (!conv) return kExitNoConverge;
  return rep.all_pass() && touching.pass ? kExitOk : kExitAssertion;
}

int cmd_stability(const RunConfig& rc) {
  const grid::Grid1D g = grid::build_grid(-1.0, 1.0, rc.n, rc.r_trunc);
  const nonlocal::OperatorSpec op = nonlocal::build_operator(g, rc.s, rc.r_far);
  const grid::ExteriorData base = presets::datum_figure1(rc.s);
  std::vector<grid::ExteriorData> perturbed;
  for (const int k : rc.k_list) {
    if (k < 1) throw std::invalid_argument("k_list entries must be positive");
    grid::ExteriorData gk;
    const double shift = 1.0 / k;
    const double s = rc.s;
    gk.eval = [s, shift](double x) { return presets::us_exact(s, x) + shift; };
    gk.growth_M = 2.0 + shift;
    gk.growth_sigma = s;
    perturbed.push_back(std::move(gk));
  }
  const analysis::StabilityReport rep = analysis::stability_experiment(
      base, perturbed, g, op, solver_config(rc));
  const double tol = 2.0 * rc.continuation_tol;
  const bool pass = rep.decreasing && rep.final_distance <= tol;
  json j{{"s", rc.s},          {"gamma", rc.gamma},
         {"n", rc.n},          {"k_list", rc.k_list},
         {"distances", rep.distances}, {"decreasing", rep.decreasing},
         {"final_distance", rep.final_distance}, {"tolerance", tol},
         {"pass", pass}};
  std::ofstream f(rc.output_dir + "/stability_report.json");
  f << j.dump(2) << "\n";
  std::cout << "stability distances:";
  for (const double d : rep.distances) std::cout << " " << d;
  std::cout << "\n  decreasing = " << (rep.decreasing ? "yes" : "no")
            << ", final = " << rep.final_distance << " (tolerance " << tol
            << ")\n";
  return pass ? kExitOk : kExitAssertion;
}

int cmd_check(const RunConfig& rc) {
  if (rc.suite != "structural")
    throw std::invalid_argument("unknown suite: " + rc.suite);
  const analysis::StructuralReport rep =
      analysis::run_structural_suite(rc.seed, rc.pairs, solver_config(rc));
  analysis::write_structural_json(rep,
                                  rc.output_dir + "/structural_report.json");
  std::cout << "structural suite: comparison "
            << (rep.comparison_all ? "pass" : "FAIL") << " (" << rep.comparison_pairs
            << " pairs), strong-max " << (rep.strong_max_all ? "pass" : "FAIL")
            << ", L-infinity ratio " << rep.linf_max_ratio << " vs "
            << rep.linf_constant << ", barrier "
            << (rep.barrier_ok ? "pass" : "FAIL") << ", ordering "
            << (rep.ordering_ok ? "pass" : "FAIL") << "\n";
  return rep.all_pass() ? kExitOk : kExitAssertion;
}

int cmd_bench(const RunConfig& rc) {
  std::mt19937_64 rng(rc.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double c0 = U(rng), c1 = U(rng), c2 = U(rng);
  const double w1 = 2.0 + U(rng), w2 = 5.0 + U(rng);
  const auto u0 = [=](double x) {
    return c0 + c1 * std::sin(w1 * x) + c2 * std::cos(w2 * x);
  };
  const grid::ExteriorData datum = presets::datum_constant(0.0);
  const std::vector<nonlocal::BenchRow> rows = nonlocal::run_fastpath_benchmark(
      rc.bench_ns, rc.s, rc.r_trunc, rc.r_far, datum, u0, rc.bench_reps);
  nonlocal::write_bench_csv(rows, rc.output_dir + "/bench.csv");
  bool ok = true;
  for (const nonlocal::BenchRow& r : rows) {
    std::cout << "n = " << r.n << ": direct " << r.direct_seconds << " s, fast "
              << r.fast_seconds << " s, speedup "
              << r.direct_seconds / r.fast_seconds << "x, max rel diff "
              << r.max_rel_diff << "\n";
    ok = ok && r.max_rel_diff <= 1e-12;
  }
  return ok ? kExitOk : kExitAssertion;
}

int dispatch(const RunConfig& rc) {
  fs::create_directories(rc.output_dir);
  int code = kExitUsage;
  if (rc.command == "harmonic") code = cmd_harmonic(rc);
  else if (rc.command == "solve") code = cmd_solve(rc);
  else if (rc.command == "extremal") code = cmd_extremal(rc);
  else if (rc.command == "exponent") code = cmd_exponent(rc);
  else if (rc.command == "multiplicity") code = cmd_multiplicity(rc);
  else if (rc.command == "stability") code = cmd_stability(rc);
  else if (rc.command == "check") code = cmd_check(rc);
  else if (rc.command == "bench") code = cmd_bench(rc);
  else throw std::invalid_argument("unknown command: " + rc.command);
  write_manifest(rc);
  return code;
}

}  // namespace

int run_cli(int argc, char** argv) {
  RunConfig rc;

  // A config file provides the base values; explicit flags override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        apply_json_config(rc, argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
      }
    }
  }

  CLI::App app{
      "Numerical laboratory for the degenerate nonlocal Dirichlet problem\n"
      "|Du|^gamma * (fractional Laplacian of order 2s) u = f on an interval,\n"
      "with exterior data on the rest of the line."};
  app.require_subcommand(1);
  std::string config_path;  // consumed above; declared so --help documents it

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON settings file (flags override its values)");
    sub->add_option("--s", rc.s, "fractional order in (0,1)")
        ->capture_default_str();
    sub->add_option("--gamma", rc.gamma, "gradient exponent >= 0")
        ->capture_default_str();
    sub->add_option("--n", rc.n, "interior nodes")->capture_default_str();
    sub->add_option("--a", rc.a, "left endpoint")->capture_default_str();
    sub->add_option("--b", rc.b, "right endpoint")->capture_default_str();
    sub->add_option("--r-trunc", rc.r_trunc, "lattice truncation radius")
        ->capture_default_str();
    sub->add_option("--r-far", rc.r_far, "end of numeric tail quadrature")
        ->capture_default_str();
    sub->add_option("--datum", rc.datum,
                    "exterior datum preset: constant|linear|figure1|"
                    "two_solutions|four_solutions|power")
        ->capture_default_str();
    sub->add_option("--datum-value", rc.datum_value, "constant datum level")
        ->capture_default_str();
    sub->add_option("--datum-slope", rc.datum_slope, "linear datum slope")
        ->capture_default_str();
    sub->add_option("--datum-intercept", rc.datum_intercept,
                    "linear datum intercept")
        ->capture_default_str();
    sub->add_option("--datum-scale", rc.datum_scale, "power datum prefactor")
        ->capture_default_str();
    sub->add_option("--datum-beta", rc.datum_beta, "power datum exponent")
        ->capture_default_str();
    sub->add_option("--growth-M", rc.growth_M,
                    "override datum growth constant M");
    sub->add_option("--growth-sigma", rc.growth_sigma,
                    "override datum growth exponent sigma (needs sigma < 2s)");
    sub->add_option("--tail-tolerance", rc.tail_tolerance,
                    "tail remainder budget (0 = automatic)");
    sub->add_option("--forcing", rc.forcing, "zero|constant|table")
        ->capture_default_str();
    sub->add_option("--forcing-value", rc.forcing_value,
                    "constant forcing level")
        ->capture_default_str();
    sub->add_option("--forcing-table", rc.forcing_table,
                    "CSV table x,f for interpolated forcing");
    sub->add_option("--damping", rc.damping, "Picard relaxation in (0,1]")
        ->capture_default_str();
    sub->add_option("--residual-tol", rc.residual_tol,
                    "Picard stopping residual")
        ->capture_default_str();
    sub->add_option("--picard-max", rc.picard_max, "Picard iteration cap")
        ->capture_default_str();
    sub->add_option("--continuation-tol", rc.continuation_tol,
                    "stage-difference stop for continuation")
        ->capture_default_str();
    sub->add_option("--eps-schedule", rc.eps_schedule,
                    "viscosity schedule (decreasing)")
        ->delimiter(',');
    sub->add_option("--eta-schedule", rc.eta_schedule,
                    "extremal schedule (decreasing)")
        ->delimiter(',');
    sub->add_option("--seed", rc.seed, "seed for randomized pieces")
        ->capture_default_str();
    sub->add_option("--output-dir", rc.output_dir, "where results are written")
        ->capture_default_str();
  };

  add_common(app.add_subcommand("harmonic", "linear Dirichlet solve"));
  add_common(app.add_subcommand(
      "solve", "degenerate solve by vanishing viscosity"));
  CLI::App* ext = app.add_subcommand("extremal", "maximal or minimal solution");
  add_common(ext);
  ext->add_option("--side", rc.side, "maximal|minimal")->capture_default_str();
  CLI::App* exp = app.add_subcommand(
      "exponent", "power-solution run and regularity exponent fit");
  add_common(exp);
  exp->add_option("--n-probe", rc.n_probe, "calibration grid size")
      ->capture_default_str();
  exp->add_flag("--sweep", rc.sweep, "run the (s, gamma) test matrix");
  exp->add_option("--fit-r0", rc.fit_r0, "largest fit window radius")
      ->capture_default_str();
  exp->add_option("--fit-ratio", rc.fit_ratio, "window shrink ratio")
      ->capture_default_str();
  exp->add_option("--fit-count", rc.fit_count, "number of windows")
      ->capture_default_str();
  CLI::App* mult = app.add_subcommand("multiplicity",
                                      "multiple-solution experiments");
  add_common(mult);
  mult->add_option("--case", rc.case_id,
                   "figure1|two_solutions|four_solutions|linear_unique")
      ->capture_default_str();
  CLI::App* stab = app.add_subcommand(
      "stability", "maximal solution under datum perturbations");
  add_common(stab);
  stab->add_option("--k-list", rc.k_list, "perturbation indices (shift 1/k)")
      ->delimiter(',');
  CLI::App* chk = app.add_subcommand("check", "property suites");
  add_common(chk);
  chk->add_option("--suite", rc.suite, "suite name (structural)")
      ->capture_default_str();
  chk->add_option("--pairs", rc.pairs, "random comparison pairs")
      ->capture_default_str();
  CLI::App* ben = app.add_subcommand("bench", "direct vs fast operator timing");
  add_common(ben);
  ben->add_option("--bench-ns", rc.bench_ns, "grid sizes to time")
      ->delimiter(',');
  ben->add_option("--bench-reps", rc.bench_reps, "timing repetitions")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      app.exit(e);
      return kExitOk;
    }
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  rc.command = app.get_subcommands().front()->get_name();
  try {
    validate_config(rc);
    return dispatch(rc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace fracdeg::cli
