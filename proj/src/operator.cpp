#include "fracdeg/operator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "fracdeg/quadrature.hpp"

namespace fracdeg::nonlocal {

namespace {

// FFTW plan creation/destruction is not thread-safe; executions on distinct
// plans are.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

int next_fast_len(int n) {
  for (int len = n;; ++len) {
    int m = len;
    for (const int p : {2, 3, 5})
      while (m % p == 0) m /= p;
    if (m == 1) return len;
  }
}

// Extended lattice values for offsets up to K around the interior block:
// positions 0..n+2K-1 map to node indices 1-K .. n+K; values beyond the
// stored node range come from the exterior datum in closed form.
struct Extension {
  int count_left = 0;
  std::vector<double> left, right;  // closed-form values beyond the grid
};

Extension make_extension(const grid::Grid1D& g, int K,
                         const grid::ExteriorData& datum) {
  Extension e;
  e.count_left = std::max(0, K - 1 - g.k_ext());
  e.left.resize(e.count_left);
  e.right.resize(e.count_left);
  for (int q = 0; q < e.count_left; ++q) {
    e.left[q] = datum.eval(g.x(1 - K + q));
    e.right[q] = datum.eval(g.x(g.k_max() + 1 + q));
  }
  return e;
}

void assemble_extended(const Extension& e, const grid::GridFunction& u,
                       std::vector<double>& E) {
  const size_t nn = u.values.size();
  E.resize(e.count_left * 2 + nn);
  std::copy(e.left.begin(), e.left.end(), E.begin());
  std::copy(u.values.begin(), u.values.end(), E.begin() + e.count_left);
  std::copy(e.right.begin(), e.right.end(), E.begin() + e.count_left + nn);
}

double growth_envelope(const grid::ExteriorData& g, double x) {
  return g.growth_M * std::pow(1.0 + std::abs(x), g.growth_sigma);
}

}  // namespace

double OperatorSpec::weight_sum() const {
  double w = 0.0;
  for (const double v : weights) w += v;
  return w;
}

double OperatorSpec::tail_mass() const {
  return c_norm * std::pow(z_lattice, -2.0 * s) / (2.0 * s);
}

double normalization_constant(double s) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("order s must lie in (0, 1)");
  return std::pow(4.0, s) * s * std::tgamma(0.5 + s) /
         (std::sqrt(std::numbers::pi) * std::tgamma(1.0 - s));
}

OperatorSpec build_operator(const grid::Grid1D& grid, double s, double r_far,
                            double lambda_ell, double Lambda_ell) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("order s must lie in (0, 1)");
  if (!(lambda_ell > 0.0) || !(Lambda_ell >= lambda_ell))
    throw std::invalid_argument("ellipticity bounds need 0 < lambda <= Lambda");
  OperatorSpec op;
  op.s = s;
  op.c_norm = normalization_constant(s);
  op.lambda_ell = lambda_ell;
  op.Lambda_ell = Lambda_ell;
  op.h = grid.h();
  op.r_trunc = grid.r_trunc();
  const long long K = std::max<long long>(
      1, std::llround(grid.r_trunc() / grid.h() - 0.5));
  op.z_lattice = (static_cast<double>(K) + 0.5) * grid.h();
  if (!(r_far > op.z_lattice))
    throw std::invalid_argument("r_far must exceed the lattice edge");
  op.r_far = r_far;
  op.weights.resize(K);
  const double h = grid.h();
  // Cell (0, 3h/2) through the second difference scaled by the exact kernel
  // second moment: exact on locally quadratic functions.
  op.weights[0] = op.c_norm * std::pow(1.5 * h, 2.0 - 2.0 * s) /
                  ((2.0 - 2.0 * s) * h * h);
  for (long long k = 2; k <= K; ++k)
    op.weights[k - 1] = op.c_norm / (2.0 * s) *
                        (std::pow((k - 0.5) * h, -2.0 * s) -
                         std::pow((k + 0.5) * h, -2.0 * s));
  return op;
}

double tail_remainder_bound(const OperatorSpec& op, const grid::ExteriorData& g,
                            double r0) {
  if (!(g.growth_sigma > 0.0))
    throw std::invalid_argument("growth exponent sigma must be positive");
  if (!(g.growth_sigma < 2.0 * op.s))
    throw std::invalid_argument(
        "growth exponent sigma must be below 2s for an integrable far field");
  return 2.0 * op.c_norm * g.growth_M *
         std::pow(1.0 + op.r_far + r0, g.growth_sigma) *
         std::pow(op.r_far, -2.0 * op.s) / (2.0 * op.s - g.growth_sigma);
}

TailSpec make_tail(const grid::Grid1D& grid, const OperatorSpec& op,
                   grid::ExteriorData g, double tolerance) {
  grid::validate_exterior_data(g, grid.a(), grid.b());
  if (!(tolerance > 0.0))
    throw std::invalid_argument("tail tolerance must be positive");
  TailSpec tail;
  tail.r_trunc = op.r_trunc;
  tail.r_far = op.r_far;
  tail.tolerance = tolerance;
  const double r0 = std::max(std::abs(grid.a()), std::abs(grid.b()));
  tail.remainder_bound = tail_remainder_bound(op, g, r0);
  tail.g = std::move(g);
  if (tail.remainder_bound > tolerance)
    throw std::invalid_argument(
        "tail tolerance not achievable with the given r_far");
  return tail;
}

TailIntegral tail_integral(const OperatorSpec& op, const TailSpec& tail,
                           double x, double u_x) {
  if (!(tail.g.growth_sigma < 2.0 * op.s))
    throw std::invalid_argument(
        "exterior growth exponent must satisfy sigma < 2s for a finite tail");
  const double p = -1.0 - 2.0 * op.s;
  auto f = [&](double z) {
    return (tail.g.eval(x + z) + tail.g.eval(x - z) - 2.0 * u_x) *
           op.c_norm * std::pow(z, p);
  };
  TailIntegral out;
  out.value = quad::integrate(f, tail.r_trunc, tail.r_far, 1e-13, 1e-11);
  out.remainder_bound =
      2.0 * op.c_norm * std::pow(tail.r_far, -2.0 * op.s) *
      (tail.g.growth_M *
           std::pow(1.0 + tail.r_far + std::abs(x), tail.g.growth_sigma) /
           (2.0 * op.s - tail.g.growth_sigma) +
       std::abs(u_x) / (2.0 * op.s));
  return out;
}

struct FracLaplacian::Impl {
  grid::Grid1D g;
  OperatorSpec op;
  TailSpec tail;
  int K = 0, n = 0, Le = 0;
  Extension ext;
  // Per-interior quadratures of the exterior datum recentred at `anchor`;
  // the operator adds t_off[i] + 2 tau (anchor - u_i), so a globally constant
  // u with g equal to that constant contributes exactly zero.
  std::vector<double> t_off;
  double W = 0.0, tau = 0.0, anchor = 0.0;

  int L = 0;  // FFT length, 5-smooth, >= n + 4K
  double* rbuf = nullptr;
  fftw_complex* cbuf = nullptr;
  fftw_complex* khat = nullptr;
  fftw_plan fwd = nullptr, inv = nullptr;
  mutable std::vector<double> scratch;

  Impl(const grid::Grid1D& grid_, const OperatorSpec& op_, const TailSpec& tail_)
      : g(grid_), op(op_), tail(tail_) {
    K = op.n_offsets();
    n = g.n_interior();
    Le = n + 2 * K;
    if (op.h != g.h())
      throw std::invalid_argument("operator was built for a different spacing");
    ext = make_extension(g, K, tail.g);
    W = op.weight_sum();
    tau = op.tail_mass();
    compute_tail_offsets();
    setup_fft();
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    if (rbuf) fftw_free(rbuf);
    if (cbuf) fftw_free(cbuf);
    if (khat) fftw_free(khat);
  }

  void compute_tail_offsets() {
    const double p = -1.0 - 2.0 * op.s;
    anchor = 0.5 * (tail.g.eval(g.a()) + tail.g.eval(g.b()));
    t_off.resize(n);
    for (int i = 1; i <= n; ++i) {
      const double x = g.x(i);
      auto f = [&](double z) {
        return (tail.g.eval(x + z) + tail.g.eval(x - z) - 2.0 * anchor) *
               std::pow(z, p);
      };
      t_off[i - 1] =
          op.c_norm * (quad::integrate(f, op.z_lattice, op.r_far, 1e-13, 1e-11) +
                       quad::integrate_to_inf(f, op.r_far, 1e-13, 1e-11));
    }
  }

  void setup_fft() {
    L = next_fast_len(n + 4 * K);
    const int nc = L / 2 + 1;
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      rbuf = fftw_alloc_real(L);
      cbuf = fftw_alloc_complex(nc);
      khat = fftw_alloc_complex(nc);
      fwd = fftw_plan_dft_r2c_1d(L, rbuf, cbuf, FFTW_ESTIMATE);
      inv = fftw_plan_dft_c2r_1d(L, cbuf, rbuf, FFTW_ESTIMATE);
    }
    // Kernel spectrum: symmetric stencil (w_K .. w_1, 0, w_1 .. w_K).
    std::fill(rbuf, rbuf + L, 0.0);
    for (int k = 1; k <= K; ++k) {
      rbuf[K - k] = op.weights[k - 1];
      rbuf[K + k] = op.weights[k - 1];
    }
    fftw_execute(fwd);
    std::memcpy(khat, cbuf, sizeof(fftw_complex) * nc);
  }

  // Shared FFT convolution: scratch holds E on entry, lattice sums for the
  // interior block on return (values at conv positions i + 2K - 1).
  void convolve(std::vector<double>& out) const {
    std::memcpy(rbuf, scratch.data(), sizeof(double) * Le);
    std::memset(rbuf + Le, 0, sizeof(double) * (L - Le));
    fftw_execute(fwd);
    const int nc = L / 2 + 1;
    for (int j = 0; j < nc; ++j) {
      const double re = cbuf[j][0] * khat[j][0] - cbuf[j][1] * khat[j][1];
      const double im = cbuf[j][0] * khat[j][1] + cbuf[j][1] * khat[j][0];
      cbuf[j][0] = re;
      cbuf[j][1] = im;
    }
    fftw_execute(inv);
    const double scale = 1.0 / L;
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = rbuf[i + 2 * K] * scale;
  }
};

FracLaplacian::FracLaplacian(const grid::Grid1D& grid, const OperatorSpec& op,
                             const TailSpec& tail)
    : impl_(std::make_unique<Impl>(grid, op, tail)) {}
FracLaplacian::~FracLaplacian() = default;
FracLaplacian::FracLaplacian(FracLaplacian&&) noexcept = default;
FracLaplacian& FracLaplacian::operator=(FracLaplacian&&) noexcept = default;

const grid::Grid1D& FracLaplacian::grid() const { return impl_->g; }
const OperatorSpec& FracLaplacian::op() const { return impl_->op; }
const TailSpec& FracLaplacian::tail() const { return impl_->tail; }
const std::vector<double>& FracLaplacian::tail_offset() const {
  return impl_->t_off;
}

std::vector<double> FracLaplacian::apply(const grid::GridFunction& u) const {
  const Impl& im = *impl_;
  if (!grid::same_grid(u.grid, im.g))
    throw std::invalid_argument("grid function does not match the operator grid");
  assemble_extended(im.ext, u, im.scratch);
  const double* E = im.scratch.data();
  const int K = im.K;
  std::vector<double> out(im.n);
  // Second-difference form: every lattice term vanishes exactly on constant
  // functions, and the anchored tail does too.
  for (int i = 1; i <= im.n; ++i) {
    const double* c = E + (i + K - 1);
    double acc = 0.0;
    for (int k = 1; k <= K; ++k)
      acc += im.op.weights[k - 1] * (c[-k] + c[k] - 2.0 * c[0]);
    out[i - 1] = acc + im.t_off[i - 1] + 2.0 * im.tau * (im.anchor - c[0]);
  }
  return out;
}

std::vector<double> FracLaplacian::apply_fast(const grid::GridFunction& u) const {
  const Impl& im = *impl_;
  if (!grid::same_grid(u.grid, im.g))
    throw std::invalid_argument("grid function does not match the operator grid");
  assemble_extended(im.ext, u, im.scratch);
  std::vector<double> out;
  im.convolve(out);
  const double diagW = 2.0 * im.W;
  for (int i = 1; i <= im.n; ++i) {
    const double ui = im.scratch[i + im.K - 1];
    out[i - 1] +=
        -diagW * ui + im.t_off[i - 1] + 2.0 * im.tau * (im.anchor - ui);
  }
  return out;
}

std::vector<double> FracLaplacian::apply_homogeneous(
    const std::vector<double>& interior) const {
  const Impl& im = *impl_;
  if (static_cast<int>(interior.size()) != im.n)
    throw std::invalid_argument("interior vector has wrong length");
  im.scratch.assign(im.Le, 0.0);
  std::copy(interior.begin(), interior.end(), im.scratch.begin() + im.K);
  std::vector<double> out;
  im.convolve(out);
  const double diag = 2.0 * (im.W + im.tau);
  for (int i = 0; i < im.n; ++i) out[i] -= diag * interior[i];
  return out;
}

std::vector<double> apply_frac_laplacian(const grid::GridFunction& u,
                                         const OperatorSpec& op,
                                         const TailSpec& tail) {
  return FracLaplacian(u.grid, op, tail).apply(u);
}

std::vector<double> apply_frac_laplacian_fast(const grid::GridFunction& u,
                                              const OperatorSpec& op,
                                              const TailSpec& tail) {
  return FracLaplacian(u.grid, op, tail).apply_fast(u);
}

std::vector<double> apply_pucci(const grid::GridFunction& u,
                                const OperatorSpec& op, const TailSpec& tail,
                                Pucci side) {
  const grid::Grid1D& g = u.grid;
  const int K = op.n_offsets();
  const int n = g.n_interior();
  const Extension ext = make_extension(g, K, tail.g);
  std::vector<double> E;
  assemble_extended(ext, u, E);
  // Raw kernel cell weights, without the normalization constant.
  std::vector<double> nu(op.weights);
  for (double& v : nu) v /= op.c_norm;
  const double up = (side == Pucci::plus) ? op.Lambda_ell : op.lambda_ell;
  const double dn = (side == Pucci::plus) ? op.lambda_ell : op.Lambda_ell;
  const double p = -1.0 - 2.0 * op.s;
  std::vector<double> out(n);
  for (int i = 1; i <= n; ++i) {
    const double* c = E.data() + (i + K - 1);
    double acc = 0.0;
    for (int k = 1; k <= K; ++k) {
      const double d = c[-k] + c[k] - 2.0 * c[0];
      acc += nu[k - 1] * (d >= 0.0 ? up * d : dn * d);
    }
    const double x = g.x(i);
    const double ui = c[0];
    auto f = [&](double z) {
      const double d = tail.g.eval(x + z) + tail.g.eval(x - z) - 2.0 * ui;
      return (d >= 0.0 ? up * d : dn * d) * std::pow(z, p);
    };
    acc += quad::integrate(f, op.z_lattice, op.r_far, 1e-13, 1e-11) +
           quad::integrate_to_inf(f, op.r_far, 1e-13, 1e-11);
    out[i - 1] = acc;
  }
  return out;
}

std::vector<BenchRow> run_fastpath_benchmark(
    const std::vector<int>& ns, double s, double r_trunc, double r_far,
    const grid::ExteriorData& g, const std::function<double(double)>& u0,
    int repetitions) {
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (const int n : ns) {
    const grid::Grid1D grid = grid::build_grid(-1.0, 1.0, n, r_trunc);
    const OperatorSpec op = build_operator(grid, s, r_far);
    const TailSpec tail = make_tail(grid, op, g);
    const grid::GridFunction u = grid::sample_function(grid, u0, g);
    const FracLaplacian F(grid, op, tail);
    std::vector<double> direct = F.apply(u);
    std::vector<double> fast = F.apply_fast(u);
    double sup = 0.0, diff = 0.0;
    for (size_t i = 0; i < direct.size(); ++i) {
      sup = std::max(sup, std::abs(direct[i]));
      diff = std::max(diff, std::abs(direct[i] - fast[i]));
    }
    double td = 1e300, tf = 1e300;
    for (int r = 0; r < std::max(1, repetitions); ++r) {
      auto t0 = clock::now();
      direct = F.apply(u);
      auto t1 = clock::now();
      fast = F.apply_fast(u);
      auto t2 = clock::now();
      td = std::min(td, std::chrono::duration<double>(t1 - t0).count());
      tf = std::min(tf, std::chrono::duration<double>(t2 - t1).count());
    }
    rows.push_back({n, s, td, tf, diff / std::max(1.0, sup)});
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "n,s,direct_seconds,fast_seconds,max_rel_diff\n";
  char buf[160];
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.n, r.s,
                  r.direct_seconds, r.fast_seconds, r.max_rel_diff);
    f << buf;
  }
}

}  // namespace fracdeg::nonlocal
