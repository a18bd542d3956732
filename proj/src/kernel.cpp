#include "deconv/kernel.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "deconv/parallel.hpp"

namespace deconv {

namespace {

// ---- Polynomial (B-spline) taper -------------------------------------------
// phi_K = 1_{[-C0, C0]} * chi_b^{*m} with C0 = (1+c)/2, b = (1-c)/(2m):
// flat on [-c, c], support [-1, 1], taper a degree-m piecewise polynomial
// (C^{m-1} joins).  The payoff is a closed-form spatial kernel,
//   K(z) = sin(C0 z)/(pi z) * sinc(b z)^m,
// which evaluates with relative accuracy; that is what makes the oscillatory
// moment integrals computable at all (an absolute error floor gets amplified
// by z^r over the integration window).

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binom(int n, int k) {
  double b = 1.0;
  for (int j = 1; j <= k; ++j) b *= static_cast<double>(n - k + j) / j;
  return b;
}

// Irwin-Hall cdf on [0, m]; evaluated on the lower half and mirrored to keep
// the alternating sum well conditioned.
double irwin_hall_cdf(double x, int m) {
  if (x <= 0.0) return 0.0;
  if (x >= m) return 1.0;
  if (x > 0.5 * m) return 1.0 - irwin_hall_cdf(m - x, m);
  double s = 0.0;
  int kmax = static_cast<int>(std::floor(x));
  for (int k = 0; k <= kmax; ++k)
    s += (k % 2 ? -1.0 : 1.0) * binom(m, k) * std::pow(x - k, m);
  return s / factorial(m);
}

double irwin_hall_pdf(double x, int m) {
  if (x <= 0.0 || x >= m) return 0.0;
  if (x > 0.5 * m) return irwin_hall_pdf(m - x, m);
  double s = 0.0;
  int kmax = static_cast<int>(std::floor(x));
  for (int k = 0; k <= kmax; ++k)
    s += (k % 2 ? -1.0 : 1.0) * binom(m, k) * std::pow(x - k, m - 1);
  return s / factorial(m - 1);
}

double sinc(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// ---- SmoothExp taper --------------------------------------------------------
double bump(double v) { return v > 0.0 ? std::exp(-1.0 / v) : 0.0; }
double bump_prime(double v) { return v > 0.0 ? std::exp(-1.0 / v) / (v * v) : 0.0; }

} // namespace

DeconvKernel::DeconvKernel(double flat_radius, TaperKind taper, int degree)
    : flat_radius_(flat_radius), taper_(taper), degree_(degree), quad_points_(1 << 14) {
  if (!(flat_radius > 0.0 && flat_radius < 1.0))
    throw std::invalid_argument("flat_radius must lie in (0, 1)");
  if (taper == TaperKind::Polynomial && degree < 1)
    throw std::invalid_argument("polynomial taper degree must be >= 1");
  std::ostringstream os;
  os << "flattop(c=" << flat_radius << ","
     << (taper == TaperKind::Polynomial ? "poly" : "smoothexp");
  if (taper == TaperKind::Polynomial) os << degree;
  os << ")";
  id_ = os.str();
  phi_cache_.resize(quad_points_ + 1);
  double dt = 1.0 / quad_points_;
  for (int i = 0; i <= quad_points_; ++i) phi_cache_[i] = phi(i * dt);
}

double DeconvKernel::phi(double t) const {
  double a = std::abs(t);
  if (a <= flat_radius_) return 1.0;
  if (a >= 1.0) return 0.0;
  if (taper_ == TaperKind::Polynomial) {
    int m = degree_;
    double b = (1.0 - flat_radius_) / (2.0 * m);
    double c0 = 0.5 * (1.0 + flat_radius_);
    // P(t - C0 <= S <= t + C0) for S a sum of m U[-b, b]
    auto G = [&](double s) { return irwin_hall_cdf((s + m * b) / (2.0 * b), m); };
    return G(a + c0) - G(a - c0);
  }
  double u = (a - flat_radius_) / (1.0 - flat_radius_);
  double ga = bump(u), gb = bump(1.0 - u);
  return gb / (ga + gb);
}

double DeconvKernel::phi_prime(double t) const {
  double a = std::abs(t);
  if (a <= flat_radius_ || a >= 1.0) return 0.0;
  double d;
  if (taper_ == TaperKind::Polynomial) {
    int m = degree_;
    double b = (1.0 - flat_radius_) / (2.0 * m);
    double c0 = 0.5 * (1.0 + flat_radius_);
    auto rho = [&](double s) { return irwin_hall_pdf((s + m * b) / (2.0 * b), m) / (2.0 * b); };
    d = rho(a + c0) - rho(a - c0);
  } else {
    double u = (a - flat_radius_) / (1.0 - flat_radius_);
    double ga = bump(u), gb = bump(1.0 - u);
    double gpa = bump_prime(u), gpb = bump_prime(1.0 - u);
    double denom = ga + gb;
    d = (-gpb * ga - gb * gpa) / (denom * denom) / (1.0 - flat_radius_);
  }
  return d * (t < 0.0 ? -1.0 : 1.0);
}

double DeconvKernel::eval(double z) const {
  if (taper_ == TaperKind::Polynomial) {
    int m = degree_;
    double b = (1.0 - flat_radius_) / (2.0 * m);
    double c0 = 0.5 * (1.0 + flat_radius_);
    double lead = std::abs(z) < 1e-9 ? c0 / M_PI
                                     : std::sin(c0 * z) / (M_PI * z);
    return lead * std::pow(sinc(b * z), m);
  }
  // (1/pi) int_0^1 cos(tz) phi_K(t) dt; phi and phi' vanish at t = 1 so the
  // trapezoid error reduces to aliasing at 2*pi/dt.
  const double dt = 1.0 / quad_points_;
  double s = 0.5 * phi_cache_[0];
  for (int i = 1; i < quad_points_; ++i) s += phi_cache_[i] * std::cos(i * dt * z);
  return s * dt / M_PI;
}

DeconvKernel make_flat_top_kernel(double flat_radius, TaperKind taper, int degree) {
  return DeconvKernel(flat_radius, taper, degree);
}

DeconvKernel default_kernel() { return DeconvKernel(0.5, TaperKind::Polynomial, 8); }

KnEvaluator::KnEvaluator(const DeconvKernel& kernel, const ErrorModel& error, double h,
                         int points, double magnitude_cap) {
  if (!(h > 0.0)) throw std::invalid_argument("K_n: bandwidth must be positive");
  np_ = points > 0 ? points : kernel.quad_points();
  h_ = h;
  double amp = 1.0 / std::abs(error.cf(1.0 / h));
  if (!(amp <= magnitude_cap)) {
    std::ostringstream os;
    os << "bandwidth too small for error scale: 1/|phi_sigma(1/h)| = " << amp
       << " exceeds cap " << magnitude_cap << " (h = " << h << ", error " << error.id() << ")";
    throw bandwidth_error(os.str());
  }
  dt_ = 1.0 / np_;
  g_re_.resize(np_ + 1);
  g_im_.resize(np_ + 1);
  for (int i = 0; i <= np_; ++i) {
    double t = i * dt_;
    double pk = kernel.phi(t);
    if (pk == 0.0) {
      g_re_[i] = g_im_[i] = 0.0;
      continue;
    }
    std::complex<double> g = pk / error.cf(t / h);
    g_re_[i] = g.real();
    g_im_[i] = g.imag();
  }
}

double KnEvaluator::operator()(double z) const {
  // G is Hermitian, so K_n(z) = (1/pi) int_0^1 [Re G cos(tz) + Im G sin(tz)] dt.
  double s = 0.5 * g_re_[0];
  for (int i = 1; i < np_; ++i) {
    double tz = i * dt_ * z;
    s += g_re_[i] * std::cos(tz) + g_im_[i] * std::sin(tz);
  }
  return s * dt_ / M_PI;
}

double KnEvaluator::deriv(double z) const {
  double s = 0.0;
  for (int i = 1; i < np_; ++i) {
    double t = i * dt_;
    double tz = t * z;
    s += t * (-g_re_[i] * std::sin(tz) + g_im_[i] * std::cos(tz));
  }
  return s * dt_ / M_PI;
}

double KnEvaluator::sup_bound() const {
  double s = 0.5 * std::abs(g_re_[0]);
  for (int i = 1; i < np_; ++i) s += std::hypot(g_re_[i], g_im_[i]);
  return s * dt_ / M_PI;
}

double KnEvaluator::l2_freq() const {
  double s = 0.5 * g_re_[0] * g_re_[0];
  for (int i = 1; i < np_; ++i) s += g_re_[i] * g_re_[i] + g_im_[i] * g_im_[i];
  return s * dt_ / M_PI;
}

namespace {
std::mutex g_kn_cache_mutex;
std::map<std::string, std::shared_ptr<const KnEvaluator>> g_kn_cache;

std::string kn_key(const DeconvKernel& kernel, const ErrorModel& error, double h, int points) {
  std::ostringstream os;
  os.precision(17);
  os << kernel.id() << "|" << error.id() << "|" << h << "|" << points;
  return os.str();
}
} // namespace

std::shared_ptr<const KnEvaluator> kn_evaluator(const DeconvKernel& kernel,
                                                const ErrorModel& error, double h,
                                                int points, double magnitude_cap) {
  std::string key = kn_key(kernel, error, h, points);
  {
    std::lock_guard<std::mutex> lock(g_kn_cache_mutex);
    auto it = g_kn_cache.find(key);
    if (it != g_kn_cache.end()) return it->second;
  }
  auto eval = std::make_shared<const KnEvaluator>(kernel, error, h, points, magnitude_cap);
  std::lock_guard<std::mutex> lock(g_kn_cache_mutex);
  auto [it, inserted] = g_kn_cache.emplace(key, eval);
  return it->second;
}

double eval_Kn(const DeconvKernel& kernel, const ErrorModel& error, double h, double x,
               int points, double magnitude_cap) {
  return (*kn_evaluator(kernel, error, h, points, magnitude_cap))(x);
}

std::vector<double> kn_values(const KnEvaluator& eval, const Grid& g) {
  std::vector<double> out(g.n);
  parallel_for(g.n, [&](std::size_t i) { out[i] = eval(g.point(i)); });
  return out;
}

std::vector<double> kn_deriv_values(const KnEvaluator& eval, const Grid& g) {
  std::vector<double> out(g.n);
  parallel_for(g.n, [&](std::size_t i) { out[i] = eval.deriv(g.point(i)); });
  return out;
}

namespace serial {
std::vector<double> kn_values(const KnEvaluator& eval, const Grid& g) {
  std::vector<double> out(g.n);
  for (std::size_t i = 0; i < g.n; ++i) out[i] = eval(g.point(i));
  return out;
}
std::vector<double> kn_deriv_values(const KnEvaluator& eval, const Grid& g) {
  std::vector<double> out(g.n);
  for (std::size_t i = 0; i < g.n; ++i) out[i] = eval.deriv(g.point(i));
  return out;
}
} // namespace serial

namespace {

// z^r K(z) is band-limited (its transform is a phi_K derivative supported on
// [-1, 1]), so a uniform trapezoid with dz < pi is alias-exact; the only real
// errors are the truncated oscillating tail and the eval accuracy.
struct MomentWindow {
  double dz;
  double zmax;
  double tail_envelope;  // |z^r K| envelope at the cut
};

MomentWindow moment_window(const DeconvKernel& kernel, int r, const MomentQuad& q) {
  MomentWindow w{};
  if (kernel.taper() == TaperKind::Polynomial) {
    int m = kernel.degree();
    double b = (1.0 - kernel.flat_radius()) / (2.0 * m);
    double big = std::pow(1.0 / b, m) / M_PI;  // |K(z)| <= big * z^-(m+1) for bz > 1
    w.dz = q.dz > 0.0 ? q.dz : 0.5;
    if (m > r) {
      // envelope of the truncated tail: big * Z^{r-m-1} * (half period ~ 3)
      double target = q.tail_tol / 4.0;
      double zcut = std::pow(3.0 * big / target, 1.0 / (m + 1.0 - r));
      w.zmax = std::min(std::max(zcut, 50.0), q.zmax);
      w.tail_envelope = 3.0 * big * std::pow(w.zmax, r - m - 1.0);
    } else {
      // the absolute moment integral does not converge for this order
      w.zmax = q.zmax;
      w.tail_envelope = 3.0 * big * std::pow(w.zmax, r - m - 1.0);
    }
  } else {
    // bump taper: no closed form; evals carry an absolute noise floor, so the
    // window must stay tight.  Usable for low moment orders only.
    w.dz = q.dz > 0.0 ? std::min(q.dz, 0.5) : 0.25;
    w.zmax = std::min(q.zmax, 400.0);
    w.tail_envelope = 0.0;  // filled from the measured tail below
  }
  return w;
}

} // namespace

MomentResult kernel_moment(const DeconvKernel& kernel, int r, const MomentQuad& q) {
  if (r < 0) throw std::invalid_argument("kernel_moment: r must be >= 0");
  MomentWindow w = moment_window(kernel, r, q);
  std::size_t mcount = static_cast<std::size_t>(std::floor(w.zmax / w.dz));
  std::vector<double> values(mcount + 1);
  parallel_for(mcount + 1, [&](std::size_t i) { values[i] = kernel.eval(i * w.dz); });
  auto integrate = [&](std::size_t step) {
    double s = 0.0;
    for (std::size_t i = step; i <= mcount; i += step) {
      double z = i * w.dz;
      double wt = (i == mcount) ? 0.5 : 1.0;
      double pair = std::pow(z, r) + std::pow(-z, r);  // cancels odd r exactly
      s += wt * pair * values[i];
    }
    if (r == 0) s += values[0];
    return s * w.dz * step;
  };
  MomentResult res;
  res.value = integrate(1);
  res.err_estimate = std::abs(res.value - integrate(2));
  res.z_used = mcount * w.dz;
  if (kernel.taper() == TaperKind::Polynomial) {
    res.err_estimate += w.tail_envelope;
    res.converged = kernel.degree() > r && res.z_used < q.zmax - w.dz;
  } else {
    double tail_env = 0.0;
    for (std::size_t i = mcount - std::min<std::size_t>(mcount, 40); i <= mcount; ++i)
      tail_env = std::max(tail_env, std::abs(values[i]) * std::pow(i * w.dz, r));
    res.err_estimate += tail_env * 6.0;
    res.converged = tail_env * 6.0 < q.tail_tol;
  }
  return res;
}

MomentResult kernel_abs_moment(const DeconvKernel& kernel, double s, const MomentQuad& q) {
  if (s < 0.0) throw std::invalid_argument("kernel_abs_moment: s must be >= 0");
  MomentWindow w = moment_window(kernel, static_cast<int>(std::ceil(s)), q);
  w.dz = std::min(w.dz, 0.1);  // |K| is not band-limited; resolve the lobes
  std::size_t mcount = static_cast<std::size_t>(std::floor(w.zmax / w.dz));
  std::vector<double> values(mcount + 1);
  parallel_for(mcount + 1, [&](std::size_t i) { values[i] = kernel.eval(i * w.dz); });
  auto integrate = [&](std::size_t step) {
    double acc = 0.0;
    for (std::size_t i = step; i <= mcount; i += step) {
      double wt = (i == mcount) ? 0.5 : 1.0;
      acc += wt * 2.0 * std::pow(i * w.dz, s) * std::abs(values[i]);
    }
    if (s == 0.0) acc += std::abs(values[0]);
    return acc * w.dz * step;
  };
  MomentResult res;
  res.value = integrate(1);
  res.err_estimate = std::abs(res.value - integrate(2)) + w.tail_envelope;
  res.z_used = mcount * w.dz;
  res.converged = res.z_used < q.zmax - w.dz;
  return res;
}

double total_variation_Kn(const DeconvKernel& kernel, const ErrorModel& error, double h,
                          double dz, double zmax, int points) {
  auto eval = kn_evaluator(kernel, error, h, points > 0 ? points : 1 << 12);
  // K_n' is odd, so V_n = 2 int_0^inf |K_n'|.
  double total = 0.0;
  double z_lo = 0.0;
  const double block = 40.0;
  std::vector<double> d;
  double prev = eval->deriv(0.0);
  while (z_lo < zmax) {
    double z_hi = std::min(z_lo + block, zmax);
    std::size_t nsteps = static_cast<std::size_t>(std::llround((z_hi - z_lo) / dz));
    d.assign(nsteps, 0.0);
    parallel_for(nsteps, [&](std::size_t j) { d[j] = eval->deriv(z_lo + (j + 1) * dz); });
    double block_tv = 0.0;
    double a = prev;
    for (std::size_t j = 0; j < nsteps; ++j) {
      double b = d[j];
      if (a == 0.0 || b == 0.0 || (a > 0) == (b > 0)) {
        block_tv += 0.5 * (std::abs(a) + std::abs(b)) * dz;
      } else {
        // split the cell at the linear zero crossing
        double frac = std::abs(a) / (std::abs(a) + std::abs(b));
        block_tv += 0.5 * std::abs(a) * frac * dz + 0.5 * std::abs(b) * (1.0 - frac) * dz;
      }
      a = b;
    }
    prev = a;
    total += block_tv;
    if (block_tv < 1e-10 * std::max(total, 1e-300) && z_lo > 0.0) break;
    z_lo = z_hi;
  }
  return 2.0 * total;
}

double kn_lp_norm(const KnEvaluator& eval, double p, double dz, double zmax) {
  if (!(p >= 2.0)) throw std::invalid_argument("kn_lp_norm: p must be >= 2 (or inf)");
  bool is_inf = std::isinf(p);
  double acc = is_inf ? std::abs(eval(0.0)) : std::pow(std::abs(eval(0.0)), p);
  double z_lo = 0.0;
  const double block = 40.0;
  std::vector<double> vals;
  while (z_lo < zmax) {
    double z_hi = std::min(z_lo + block, zmax);
    std::size_t nsteps = static_cast<std::size_t>(std::llround((z_hi - z_lo) / dz));
    vals.assign(nsteps, 0.0);
    parallel_for(nsteps, [&](std::size_t j) { vals[j] = eval(z_lo + (j + 1) * dz); });
    double block_acc = 0.0;
    for (double v : vals) {
      if (is_inf)
        block_acc = std::max(block_acc, std::abs(v));
      else
        block_acc += 2.0 * std::pow(std::abs(v), p);
    }
    if (is_inf) {
      double before = acc;
      acc = std::max(acc, block_acc);
      if (block_acc < 1e-12 * before && z_lo > 0.0) break;
    } else {
      acc += block_acc;
      if (block_acc < 1e-12 * acc && z_lo > 0.0) break;
    }
    z_lo = z_hi;
  }
  return is_inf ? acc : std::pow(acc * dz, 1.0 / p);
}

Condition4Report condition4_check(const DeconvKernel& kernel) {
  Condition4Report rep{0.0, 0.0};
  const int n = 1 << 12;
  const double dt = 1.0 / n;
  for (int i = 0; i <= n; ++i) {
    double d = kernel.phi_prime(i * dt);
    rep.sup_sq = std::max(rep.sup_sq, d * d);
    rep.integral_sq += d * d * dt * (i == 0 || i == n ? 0.5 : 1.0) * 2.0;
  }
  return rep;
}

} // namespace deconv
