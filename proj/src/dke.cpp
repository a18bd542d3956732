#include "deconv/dke.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "deconv/parallel.hpp"

namespace deconv {

std::complex<double> empirical_cf(std::span<const double> W, double t) {
  if (W.empty()) throw std::invalid_argument("empirical_cf: empty sample");
  if (!std::isfinite(t)) throw std::invalid_argument("empirical_cf: non-finite t");
  std::complex<double> acc(0.0, 0.0);
  for (double w : W) acc += std::polar(1.0, t * w);
  return acc / static_cast<double>(W.size());
}

std::vector<std::complex<double>> empirical_cf_grid(std::span<const double> W, double dt,
                                                    std::size_t m) {
  if (W.empty()) throw std::invalid_argument("empirical_cf_grid: empty sample");
  const std::size_t n = W.size();
  const std::size_t bs = 1024;  // fixed block size: partial sums combine in
                                // block order, independent of thread count
  const std::size_t nb = (n + bs - 1) / bs;
  std::vector<std::vector<std::complex<double>>> partial(nb);
  parallel_for(nb, [&](std::size_t b) {
    std::vector<std::complex<double>> acc(m, {0.0, 0.0});
    std::size_t lo = b * bs, hi = std::min(n, lo + bs);
    for (std::size_t j = lo; j < hi; ++j) {
      const std::complex<double> rot = std::polar(1.0, dt * W[j]);
      std::complex<double> cur(1.0, 0.0);
      for (std::size_t k = 0; k < m; ++k) {
        acc[k] += cur;
        cur *= rot;
      }
    }
    partial[b] = std::move(acc);
  });
  std::vector<std::complex<double>> out(m, {0.0, 0.0});
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t k = 0; k < m; ++k) out[k] += partial[b][k];
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

namespace serial {
std::vector<std::complex<double>> empirical_cf_grid(std::span<const double> W, double dt,
                                                    std::size_t m) {
  if (W.empty()) throw std::invalid_argument("empirical_cf_grid: empty sample");
  std::vector<std::complex<double>> out(m, {0.0, 0.0});
  for (std::size_t k = 0; k < m; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (double w : W) acc += std::polar(1.0, dt * static_cast<double>(k) * w);
    out[k] = acc / static_cast<double>(W.size());
  }
  return out;
}
} // namespace serial

namespace {

bool is_pow2(std::size_t v) { return v >= 2 && (v & (v - 1)) == 0; }

} // namespace

DkeEstimate dke_fit(std::span<const double> W, const DeconvKernel& kernel,
                    const ErrorModel& error, double h, const GridSpec& spec,
                    double magnitude_cap) {
  if (W.empty()) throw std::invalid_argument("dke_fit: empty sample");
  if (!(h > 0.0)) throw std::invalid_argument("dke_fit: bandwidth must be positive");
  if (!is_pow2(spec.points)) throw std::invalid_argument("dke_fit: grid points must be 2^J");
  if (spec.pad_factor < 1) throw std::invalid_argument("dke_fit: pad_factor must be >= 1");

  double amp = 1.0 / std::abs(error.cf(1.0 / h));
  if (!(amp <= magnitude_cap)) {
    std::ostringstream os;
    os << "bandwidth too small for error scale: 1/|phi_sigma(1/h)| = " << amp
       << " exceeds cap " << magnitude_cap;
    throw bandwidth_error(os.str());
  }

  auto [wmin_it, wmax_it] = std::minmax_element(W.begin(), W.end());
  double wmin = *wmin_it, wmax = *wmax_it;
  double sigma_eff = error.is_identity() ? 0.0 : error.sigma();
  double pad = std::max(spec.pad_bandwidths * h, 4.0 * sigma_eff);
  double xmin = std::isnan(spec.xmin) ? wmin - pad : spec.xmin;
  double xmax = std::isnan(spec.xmax) ? wmax + pad : spec.xmax;
  if (!(xmax > xmin)) throw std::invalid_argument("dke_fit: empty grid range");
  if (xmin > wmin - 5.0 * h + 1e-12 || xmax < wmax + 5.0 * h - 1e-12) {
    std::ostringstream os;
    os << "dke_fit: grid must cover the sample range plus 5h padding; need ["
       << wmin - 5.0 * h << ", " << wmax + 5.0 * h << "]";
    throw std::invalid_argument(os.str());
  }

  const std::size_t m_out = spec.points;
  const double dx = (xmax - xmin) / static_cast<double>(m_out);
  const std::size_t m_pad = m_out * static_cast<std::size_t>(spec.pad_factor);
  const double period = static_cast<double>(m_pad) * dx;
  const double dt = 2.0 * M_PI / period;
  if (1.0 / h > M_PI / dx + 1e-9)
    throw std::invalid_argument(
        "dke_fit: grid spacing too coarse for this bandwidth (need dx <= pi*h)");
  std::size_t kmax = static_cast<std::size_t>(std::floor((1.0 / h) / dt));
  kmax = std::min(kmax, m_pad / 2 - 1);

  std::vector<std::complex<double>> cf = empirical_cf_grid(W, dt, kmax + 1);
  std::vector<std::complex<double>> freq(m_pad, {0.0, 0.0});
  for (std::size_t k = 0; k <= kmax; ++k) {
    double t = static_cast<double>(k) * dt;
    double pk = kernel.phi(h * t);
    if (pk == 0.0) continue;
    std::complex<double> psi = cf[k] * pk / error.cf(t);
    std::complex<double> c = psi * std::polar(1.0, -t * xmin);
    freq[k] = c;
    if (k > 0) freq[m_pad - k] = std::conj(c);
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spatial;
  fft.fwd(spatial, freq);

  DkeEstimate est;
  est.grid = Grid{xmin, dx, m_out};
  est.values.resize(m_out);
  double imag_max = 0.0;
  for (std::size_t i = 0; i < m_out; ++i) {
    est.values[i] = spatial[i].real() / period;
    imag_max = std::max(imag_max, std::abs(spatial[i].imag()) / period);
  }
  est.h = h;
  est.n = W.size();
  est.kernel_id = kernel.id();
  est.error_id = error.id();
  est.imag_residue = imag_max;
  est.mass = trapezoid(est.grid, est.values);
  if (std::abs(est.mass - 1.0) > 1e-3)
    est.warnings.push_back("grid too narrow: mass outside grid exceeds 1e-3");
  return est;
}

double dke_eval_direct(std::span<const double> W, const DeconvKernel& kernel,
                       const ErrorModel& error, double h, double x, int points,
                       double magnitude_cap) {
  if (W.empty()) throw std::invalid_argument("dke_eval_direct: empty sample");
  auto eval = kn_evaluator(kernel, error, h, points, magnitude_cap);
  double s = 0.0;
  for (double w : W) s += (*eval)((x - w) / h);
  return s / (static_cast<double>(W.size()) * h);
}

std::vector<double> dke_direct_grid(std::span<const double> W, const DeconvKernel& kernel,
                                    const ErrorModel& error, double h, const Grid& g,
                                    int points) {
  auto eval = kn_evaluator(kernel, error, h, points);
  std::vector<double> out(g.n);
  parallel_for(g.n, [&](std::size_t i) {
    double x = g.point(i), s = 0.0;
    for (double w : W) s += (*eval)((x - w) / h);
    out[i] = s / (static_cast<double>(W.size()) * h);
  });
  return out;
}

namespace serial {
std::vector<double> dke_direct_grid(std::span<const double> W, const DeconvKernel& kernel,
                                    const ErrorModel& error, double h, const Grid& g,
                                    int points) {
  auto eval = kn_evaluator(kernel, error, h, points);
  std::vector<double> out(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    double x = g.point(i), s = 0.0;
    for (double w : W) s += (*eval)((x - w) / h);
    out[i] = s / (static_cast<double>(W.size()) * h);
  }
  return out;
}
} // namespace serial

void clip_and_renormalize(DkeEstimate& est) {
  for (auto& v : est.values) v = std::max(v, 0.0);
  double mass = trapezoid(est.grid, est.values);
  if (mass > 0.0)
    for (auto& v : est.values) v /= mass;
  est.mass = trapezoid(est.grid, est.values);
  est.projected = true;
}

double bandwidth(const BandwidthSchedule& schedule, std::size_t n, const ErrorModel& error) {
  if (n < 2) throw std::invalid_argument("bandwidth: n must be >= 2 (log n degeneracy)");
  const EnvelopeParams& e = error.envelope();
  double logn = std::log(static_cast<double>(n));
  switch (schedule.regime) {
    case BandwidthRegime::SupersmoothLp:
      return std::pow(2.0 / (schedule.gamma * e.varrho), 1.0 / e.beta) *
             std::pow(logn, -1.0 / e.beta);
    case BandwidthRegime::SupersmoothSup:
      return std::pow(4.0 / (schedule.gamma * e.varrho), 1.0 / e.beta) *
             std::pow(logn, -1.0 / e.beta);
    case BandwidthRegime::Accelerated:
      return accelerated_sigma(n, schedule.eta, schedule.t_exponent);
  }
  throw std::logic_error("bandwidth: unknown regime");
}

double accelerated_sigma(std::size_t n, double eta, double t) {
  if (n < 3) throw std::invalid_argument("accelerated_sigma: n must be >= 3");
  if (!(eta > 0.0)) throw std::invalid_argument("accelerated_sigma: eta must be positive");
  double nn = static_cast<double>(n);
  return std::pow(nn, -1.0 / (2.0 * eta + 1.0)) * std::pow(std::log(nn), t / eta);
}

double lp_distance(const Grid& g, std::span<const double> f, std::span<const double> g2,
                   double p) {
  return lp_distance(g, f, g, g2, p);
}

double lp_distance(const Grid& gf, std::span<const double> f, const Grid& gg,
                   std::span<const double> g2, double p) {
  if (!gf.same_as(gg) || f.size() != gf.n || g2.size() != gg.n)
    throw std::invalid_argument("lp_distance: mismatched grids");
  if (!(p >= 2.0)) throw std::invalid_argument("lp_distance: p must be in [2, inf]");
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i] - g2[i]));
    return m;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double d = std::pow(std::abs(f[i] - g2[i]), p);
    s += (i == 0 || i + 1 == f.size()) ? 0.5 * d : d;
  }
  return std::pow(s * gf.dx, 1.0 / p);
}

} // namespace deconv
