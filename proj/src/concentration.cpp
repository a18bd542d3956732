#include "deconv/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "deconv/parallel.hpp"
#include "deconv/quadrature.hpp"
#include "deconv/rng.hpp"

namespace deconv {

VarpiExponents varpi(double p, double beta0) {
  if (!(p >= 2.0)) throw std::invalid_argument("varpi: p must be in [2, inf]");
  VarpiExponents v{};
  double one_m = std::isinf(p) ? 1.0 : 1.0 - 1.0 / p;
  v.varpi_p = beta0 >= 0.0 ? -one_m : beta0 - one_m;
  v.varpi_inf = beta0 >= 0.0 ? -1.0 : beta0 - 1.0;
  v.varpi_sup = beta0 >= 0.5 ? -1.0 : 4.0 * beta0 - 4.0;
  return v;
}

std::vector<Lemma1Row> check_lemma1_norm(const DeconvKernel& kernel, const ErrorModel& error,
                                         const std::vector<double>& h_grid, double p) {
  if (h_grid.empty()) throw std::invalid_argument("lemma1: empty h grid");
  for (std::size_t i = 1; i < h_grid.size(); ++i)
    if (!(h_grid[i] < h_grid[i - 1]))
      throw std::invalid_argument("lemma1: h grid must be decreasing");
  const EnvelopeParams& e = error.envelope();
  std::vector<Lemma1Row> rows;
  rows.reserve(h_grid.size());
  for (double h : h_grid) {
    auto eval = kn_evaluator(kernel, error, h, 1 << 12);
    double kn_norm = kn_lp_norm(*eval, p, 0.02, 2400.0);
    // ||K~_n||_p = h^{-(1-1/p)} ||K_n||_p (p = inf: h^{-1} sup|K_n|)
    double norm = std::isinf(p) ? kn_norm / h : kn_norm * std::pow(h, -(1.0 - 1.0 / p));
    double w = std::isinf(p) ? varpi(p, e.beta0).varpi_inf : varpi(p, e.beta0).varpi_p;
    double bound = std::pow(h, w) * std::exp(std::pow(h, -e.beta) / e.varrho);
    rows.push_back(Lemma1Row{h, norm, bound, norm / bound});
  }
  return rows;
}

TrendFit trend_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("trend_fit: need >= 3 points");
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  TrendFit f;
  f.slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - my - f.slope * (x[i] - mx);
    sse += r * r;
  }
  double se = std::sqrt(sse / (n - 2.0) / sxx);
  f.ci_lo = f.slope - 2.0 * se;
  f.ci_hi = f.slope + 2.0 * se;
  return f;
}

namespace {

// Geometric 12-rung ladder spanning the 50th-99.5th percentiles, exceedance
// frequencies, and an OLS fit of log P against x(lambda).
void ladder_fit(const std::vector<double>& devs, EmpiricalTailFit& out,
                bool square_abscissa) {
  std::vector<double> sorted(devs);
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double q) {
    return sorted[static_cast<std::size_t>(q * (sorted.size() - 1))];
  };
  double lo = std::max(pct(0.50), 1e-300), hi = std::max(pct(0.995), lo * (1.0 + 1e-9));
  const int rungs = 12;
  out.thresholds.resize(rungs);
  out.exceed_prob.resize(rungs);
  double ratio = std::pow(hi / lo, 1.0 / (rungs - 1));
  for (int r = 0; r < rungs; ++r) {
    double thr = lo * std::pow(ratio, r);
    out.thresholds[r] = thr;
    std::size_t count = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), thr);
    out.exceed_prob[r] = static_cast<double>(count) / sorted.size();
  }
  std::vector<double> xs, ys;
  for (int r = 0; r < rungs; ++r) {
    if (out.exceed_prob[r] <= 0.0) continue;
    double t = out.thresholds[r];
    xs.push_back(square_abscissa ? t * t : t);
    ys.push_back(std::log(out.exceed_prob[r]));
  }
  if (xs.size() >= 3) {
    TrendFit tf = trend_fit(xs, ys);
    out.decay_rate = -tf.slope;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    out.decay_intercept = my / xs.size() + out.decay_rate * mx / xs.size();
  }
  double mean = 0.0;
  for (double d : devs) mean += d;
  mean /= devs.size();
  double ss = 0.0;
  for (double d : devs) ss += (d - mean) * (d - mean);
  out.mean_dev = mean;
  out.se_mean = std::sqrt(ss / (devs.size() - 1.0) / devs.size());
  out.median = pct(0.5);
}

} // namespace

EmpiricalTailFit mc_deviation(const TrueDensity& truth, const DeconvKernel& kernel,
                              const ErrorModel& error, double h, std::size_t n, int reps,
                              double p, std::uint64_t seed) {
  if (reps < 100) throw std::invalid_argument("mc_deviation: reps must be >= 100");
  double sig_eff = error.is_identity() ? 0.0 : error.sigma();
  double pad = std::max(70.0 * h, 4.0 * sig_eff) + 8.0 * truth.sd();
  double lo = truth.quantile(5e-5) - pad, hi = truth.quantile(1.0 - 5e-5) + pad;
  const std::size_t points = 2048;
  GridSpec gs{lo, hi, points, 8};
  Grid grid{lo, (hi - lo) / static_cast<double>(points), points};

  std::vector<std::vector<double>> fits(reps);
  parallel_for_dynamic(reps, [&](std::size_t r) {
    std::vector<double> X = truth.sample(n, derive_seed(seed, {r, 0}));
    std::vector<double> U = error.sample(n, derive_seed(seed, {r, 1}));
    std::vector<double> W(n);
    for (std::size_t i = 0; i < n; ++i) W[i] = X[i] + U[i];
    fits[r] = dke_fit(W, kernel, error, h, gs).values;
  });

  std::vector<double> mean(points, 0.0);
  for (const auto& f : fits)
    for (std::size_t i = 0; i < points; ++i) mean[i] += f[i];
  for (auto& v : mean) v /= reps;

  std::vector<double> devs(reps);
  for (int r = 0; r < reps; ++r) devs[r] = lp_distance(grid, fits[r], mean, p);

  EmpiricalTailFit out;
  out.seed = seed;
  ladder_fit(devs, out, /*square_abscissa=*/false);
  return out;
}

DkwResult dkw_supnorm_check(const TrueDensity& truth, const ErrorModel& error, std::size_t n,
                            int reps, std::uint64_t seed, double required_fraction) {
  if (reps < 200) throw std::invalid_argument("dkw: reps must be >= 200");

  // F_W(w) = E_U[F_X(w - U)], integrating over the error rather than the
  // truth so heavy-tailed truths pose no problem: Gauss-Hermite against a
  // Gaussian error, the probability transform u = sigma tan(pi(v - 1/2))
  // against a Cauchy error.
  double sig = error.is_identity() ? 0.0 : error.sigma();
  std::function<double(double)> F;
  if (error.is_identity()) {
    F = [&truth](double w) { return truth.cdf(w); };
  } else if (error.kind() == ErrorKind::Gaussian) {
    static const GaussHermite gh = gauss_hermite(96);
    F = [&truth, sig](double w) {
      double acc = 0.0;
      for (std::size_t q = 0; q < gh.nodes.size(); ++q)
        acc += gh.weights[q] * truth.cdf(w - std::sqrt(2.0) * sig * gh.nodes[q]);
      return std::clamp(acc / std::sqrt(M_PI), 0.0, 1.0);
    };
  } else if (error.kind() == ErrorKind::Cauchy) {
    F = [&truth, sig](double w) {
      const int q = 2048;
      double acc = 0.0;
      for (int j = 0; j < q; ++j) {
        double v = (j + 0.5) / q;
        acc += truth.cdf(w - sig * std::tan(M_PI * (v - 0.5)));
      }
      return std::clamp(acc / q, 0.0, 1.0);
    };
  } else {
    throw std::invalid_argument("dkw: custom errors need a cdf-based F_W; not supported");
  }

  std::vector<double> sups(reps);
  parallel_for_dynamic(reps, [&](std::size_t r) {
    std::vector<double> X = truth.sample(n, derive_seed(seed, {r, 0}));
    std::vector<double> U = error.sample(n, derive_seed(seed, {r, 1}));
    std::vector<double> V(n);
    for (std::size_t i = 0; i < n; ++i) V[i] = F(X[i] + U[i]);
    std::sort(V.begin(), V.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double up = static_cast<double>(i + 1) / n - V[i];
      double dn = V[i] - static_cast<double>(i) / n;
      d = std::max(d, std::max(up, dn));
    }
    sups[r] = d;
  });

  DkwResult res;
  res.sups = sups;
  std::vector<double> lambdas(sups);
  double root_n = std::sqrt(static_cast<double>(n));
  for (auto& v : lambdas) v *= root_n;
  res.fit.seed = seed;
  ladder_fit(lambdas, res.fit, /*square_abscissa=*/true);
  std::vector<double> sorted(sups);
  std::sort(sorted.begin(), sorted.end());
  res.median_sup = sorted[sorted.size() / 2];
  res.fitted_exponent = res.fit.decay_rate;
  res.exponent_ok = res.fitted_exponent >= required_fraction * 2.0;
  return res;
}

bool plugin_test(std::span<const double> W, const Grid& grid, std::span<const double> f0X,
                 const DeconvKernel& kernel, const ErrorModel& error, double h, double M1,
                 double xi_n, double p) {
  if (f0X.size() != grid.n) throw std::invalid_argument("plugin_test: grid mismatch");
  GridSpec gs{grid.x0, grid.x0 + grid.dx * static_cast<double>(grid.n), grid.n, 8};
  DkeEstimate est = dke_fit(W, kernel, error, h, gs);
  if (!est.grid.same_as(grid)) throw std::invalid_argument("plugin_test: grid mismatch");
  double dist = lp_distance(grid, est.values, f0X, p);
  return dist > M1 * xi_n;
}

} // namespace deconv
