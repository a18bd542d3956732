#include "deconv/rates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "deconv/parallel.hpp"
#include "deconv/quadrature.hpp"

namespace deconv {

namespace {

double normal_pdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

} // namespace

double TrueDensity::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: q must be in (0,1)");
  double lo = mean_, hi = mean_;
  double step = std::max(sd_, 1e-6);
  while (cdf_(lo) > q) {
    lo -= step;
    step *= 2.0;
  }
  step = std::max(sd_, 1e-6);
  while (cdf_(hi) < q) {
    hi += step;
    step *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
    double mid = 0.5 * (lo + hi);
    (cdf_(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TrueDensity make_gauss_mixture(const std::vector<double>& weights,
                               const std::vector<double>& means,
                               const std::vector<double>& sds) {
  std::size_t m = weights.size();
  if (m == 0 || means.size() != m || sds.size() != m)
    throw std::invalid_argument("gauss mixture: weights/means/sds must match and be nonempty");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("gauss mixture: weights must be positive");
    wsum += w;
  }
  for (double s : sds)
    if (!(s > 0.0)) throw std::invalid_argument("gauss mixture: sds must be positive");
  std::vector<double> w(weights);
  for (auto& v : w) v /= wsum;

  TrueDensity td;
  td.kind_ = TruthKind::GaussMixture;
  std::ostringstream os;
  os << "gauss_mixture(k=" << m << ")";
  td.id_ = os.str();
  td.eta_ = std::numeric_limits<double>::infinity();
  double mean = 0.0, second = 0.0;
  double mmax = 0.0, smax = 0.0, smin = sds[0];
  for (std::size_t j = 0; j < m; ++j) {
    mean += w[j] * means[j];
    second += w[j] * (sds[j] * sds[j] + means[j] * means[j]);
    mmax = std::max(mmax, std::abs(means[j]));
    smax = std::max(smax, sds[j]);
    smin = std::min(smin, sds[j]);
  }
  td.mean_ = mean;
  td.sd_ = std::sqrt(std::max(second - mean * mean, 1e-12));
  // valid exponential-tail certificate: |x| >= 2 max|m| gives |x-m| >= |x|/2
  td.tail_ = TailCertificate{false, 1.0 / (smin * std::sqrt(2.0 * M_PI)),
                             1.0 / (8.0 * smax * smax), 2.0, std::max(2.0 * mmax, 1.0)};
  auto wv = w;
  auto mv = means;
  auto sv = sds;
  td.pdf_ = [wv, mv, sv](double x) {
    double s = 0.0;
    for (std::size_t j = 0; j < wv.size(); ++j) s += wv[j] * normal_pdf(x, mv[j], sv[j]);
    return s;
  };
  td.cdf_ = [wv, mv, sv](double x) {
    double s = 0.0;
    for (std::size_t j = 0; j < wv.size(); ++j) s += wv[j] * normal_cdf(x, mv[j], sv[j]);
    return s;
  };
  td.sample_ = [wv, mv, sv](std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) {
      int j = draw_categorical(rng, wv);
      v = draw_normal(rng, mv[j], sv[j]);
    }
    return out;
  };
  return td;
}

TrueDensity make_heavy_tail(double c2, double scale, double center) {
  if (!(c2 > 1.0)) throw std::invalid_argument("heavy tail: need tail index c2 > 1");
  if (!(scale > 0.0)) throw std::invalid_argument("heavy tail: scale must be positive");
  double nu = c2 - 1.0;
  TrueDensity td;
  td.kind_ = TruthKind::HeavyTail;
  std::ostringstream os;
  os << "heavy_tail(c2=" << c2 << ",scale=" << scale << ")";
  td.id_ = os.str();
  td.eta_ = std::numeric_limits<double>::infinity();
  td.mean_ = center;
  td.sd_ = scale;  // dispersion scale; the variance may not exist

  double logc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                0.5 * std::log(nu * M_PI) - std::log(scale);
  td.pdf_ = [nu, scale, center, logc](double x) {
    double u = (x - center) / scale;
    return std::exp(logc - 0.5 * (nu + 1.0) * std::log1p(u * u / nu));
  };
  auto pdf_copy = td.pdf_;
  td.cdf_ = [nu, scale, center, pdf_copy](double x) {
    double u = (x - center) / scale;
    if (std::abs(nu - 1.0) < 1e-12) return 0.5 + std::atan(u) / M_PI;
    if (std::abs(nu - 2.0) < 1e-12) return 0.5 + u / (2.0 * std::sqrt(2.0 + u * u));
    if (std::abs(nu - 3.0) < 1e-12) {
      double v = u / std::sqrt(3.0);
      return 0.5 + (v / (1.0 + v * v) + std::atan(v)) / M_PI;
    }
    // generic nu: integrate the standardized pdf from the center
    double half = adaptive_simpson([&](double s) { return pdf_copy(center + s * scale); }, 0.0,
                                   std::abs(u), 1e-12) *
                  scale;
    return u >= 0.0 ? 0.5 + half : 0.5 - half;
  };
  td.sample_ = [nu, scale, center](std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) {
      double z = draw_normal(rng);
      double chi2 = draw_gamma(rng, 0.5 * nu, 2.0);
      v = center + scale * z / std::sqrt(chi2 / nu);
    }
    return out;
  };
  // certificate constant: sup over the tail of f(z) |z|^{c2}, scanned once
  double T = 2.0 * std::abs(center) + 10.0 * scale;
  double c1 = 0.0;
  for (double z = T; z < 1e7; z *= 1.25)
    c1 = std::max(c1, td.pdf_(z) * std::pow(z, c2));
  td.tail_ = TailCertificate{true, 1.05 * c1, c2, 2.0, T};
  return td;
}

TrueDensity make_bspline2(double scale, double center) {
  if (!(scale > 0.0)) throw std::invalid_argument("bspline2: scale must be positive");
  TrueDensity td;
  td.kind_ = TruthKind::Bspline2;
  std::ostringstream os;
  os << "bspline2(scale=" << scale << ")";
  td.id_ = os.str();
  td.eta_ = 2.0;
  td.mean_ = center;
  td.sd_ = 0.5 * scale;
  td.pdf_ = [scale, center](double x) {
    double u = std::abs(x - center) / scale;
    double v;
    if (u >= 1.5)
      v = 0.0;
    else if (u >= 0.5)
      v = 0.5 * (1.5 - u) * (1.5 - u);
    else
      v = 0.75 - u * u;
    return v / scale;
  };
  td.cdf_ = [scale, center](double x) {
    double u = (x - center) / scale;
    if (u <= -1.5) return 0.0;
    if (u >= 1.5) return 1.0;
    if (u <= -0.5) {
      double t = u + 1.5;
      return t * t * t / 6.0;
    }
    if (u < 0.5) return 0.5 + 0.75 * u - u * u * u / 3.0;
    double t = 1.5 - u;
    return 1.0 - t * t * t / 6.0;
  };
  td.sample_ = [scale, center](std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> out(n);
    for (auto& v : out)
      v = center + scale * (draw_uniform(rng) + draw_uniform(rng) + draw_uniform(rng) - 1.5);
    return out;
  };
  td.tail_ = TailCertificate{false, 1.0, 1.0, 4.0, 1.5 * scale + std::abs(center)};
  return td;
}

double accelerated_t_bound(double eta, double c3) {
  if (!(eta > 0.0 && c3 > 0.0))
    throw std::invalid_argument("accelerated_t_bound: eta, c3 must be positive");
  return (2.0 + 1.0 / eta + 1.0 / c3) / (2.0 + 1.0 / eta);
}

void validate_accelerated_t(double eta, double t, double c3) {
  double bound = accelerated_t_bound(eta, c3);
  if (!(t > bound)) {
    std::ostringstream os;
    os << "accelerated schedule: t = " << t << " must exceed (2+1/eta+1/c3)/(2+1/eta) = "
       << bound << " (eta = " << eta << ", c3 = " << c3 << ")";
    throw std::invalid_argument(os.str());
  }
}

std::string method_name(RateMethod m) {
  switch (m) {
    case RateMethod::Dke: return "DKE";
    case RateMethod::DpmmMean: return "DPMM-mean";
    case RateMethod::KdeW: return "KDE-W";
  }
  return "?";
}

std::vector<double> kde_of_w(std::span<const double> W, const Grid& grid, double bandwidth) {
  if (W.empty()) throw std::invalid_argument("kde_of_w: empty sample");
  double h = bandwidth;
  if (!(h > 0.0)) {
    // Silverman's rule of thumb
    std::vector<double> s(W.begin(), W.end());
    std::sort(s.begin(), s.end());
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= s.size();
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / std::max<std::size_t>(s.size() - 1, 1));
    double iqr = s[static_cast<std::size_t>(0.75 * (s.size() - 1))] -
                 s[static_cast<std::size_t>(0.25 * (s.size() - 1))];
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(sd, 1e-3);
    h = 0.9 * spread * std::pow(static_cast<double>(s.size()), -0.2);
  }
  std::vector<double> out(grid.n, 0.0);
  parallel_for(grid.n, [&](std::size_t i) {
    double x = grid.point(i), acc = 0.0;
    for (double w : W) acc += normal_pdf((x - w) / h, 0.0, 1.0);
    out[i] = acc / (static_cast<double>(W.size()) * h);
  });
  return out;
}

SlopeFit fit_log_rate(const std::vector<std::size_t>& ns,
                      const std::vector<std::vector<double>>& errors_by_n, RateModel model,
                      int bootstrap, std::uint64_t seed) {
  if (ns.size() < 4) throw std::invalid_argument("fit_log_rate: need >= 4 n-levels");
  if (errors_by_n.size() != ns.size())
    throw std::invalid_argument("fit_log_rate: errors_by_n size mismatch");
  for (const auto& errs : errors_by_n) {
    if (errs.empty()) throw std::invalid_argument("fit_log_rate: empty error set");
    for (double e : errs)
      if (!(e > 0.0)) throw std::invalid_argument("fit_log_rate: errors must be positive");
  }
  std::vector<double> xs(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    double ln = std::log(static_cast<double>(ns[i]));
    xs[i] = model == RateModel::Supersmooth ? std::log(ln) : ln;
  }
  auto slope_of = [&](const std::vector<double>& meds) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += std::log(meds[i]);
    }
    mx /= xs.size();
    my /= xs.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (std::log(meds[i]) - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
  };
  std::vector<double> meds(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) meds[i] = median_of(errors_by_n[i]);
  SlopeFit fit;
  fit.slope = slope_of(meds);

  Rng rng = make_rng(seed);
  std::vector<double> slopes(bootstrap);
  std::vector<double> resampled;
  std::vector<double> bmeds(ns.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const auto& errs = errors_by_n[i];
      resampled.resize(errs.size());
      for (auto& v : resampled)
        v = errs[std::uniform_int_distribution<std::size_t>(0, errs.size() - 1)(rng)];
      bmeds[i] = median_of(resampled);
    }
    slopes[b] = slope_of(bmeds);
  }
  std::sort(slopes.begin(), slopes.end());
  auto at = [&](double q) {
    return slopes[static_cast<std::size_t>(q * (slopes.size() - 1))];
  };
  fit.ci_lo = at(0.025);
  fit.ci_hi = at(0.975);
  return fit;
}

namespace {

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 2;
  while (p < v) p <<= 1;
  return p;
}

} // namespace

RateReport run_rate_experiment(const RateConfig& cfg) {
  if (cfg.n_grid.size() < 4)
    throw std::invalid_argument("rates: n_grid needs >= 4 levels");
  for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1])
      throw std::invalid_argument("rates: n_grid must be increasing");
  if (cfg.reps < 10) throw std::invalid_argument("rates: reps must be >= 10");
  if (cfg.methods.empty() || cfg.p_list.empty())
    throw std::invalid_argument("rates: methods and p_list must be nonempty");
  if (!cfg.error && !cfg.sigma_schedule)
    throw std::invalid_argument("rates: need a fixed error model or a sigma schedule");
  if (cfg.sigma_schedule)
    validate_accelerated_t(cfg.sigma_schedule->eta, cfg.sigma_schedule->t,
                           cfg.truth.tail().c3);

  const std::size_t n_levels = cfg.n_grid.size();
  const std::size_t cells = n_levels * static_cast<std::size_t>(cfg.reps);

  struct CellOut {
    std::vector<RateRow> rows;
  };
  std::vector<CellOut> out(cells);

  parallel_for_dynamic(cells, [&](std::size_t c) {
    std::size_t ni = c / cfg.reps;
    int rep = static_cast<int>(c % cfg.reps);
    std::size_t n = cfg.n_grid[ni];
    std::uint64_t cell_seed = derive_seed(cfg.master_seed, {ni, static_cast<std::uint64_t>(rep)});
    auto emit_fail = [&](const std::string& why) {
      for (RateMethod m : cfg.methods)
        for (double p : cfg.p_list)
          out[c].rows.push_back(RateRow{n, rep, m, p,
                                        std::numeric_limits<double>::quiet_NaN(), cell_seed,
                                        why});
    };
    try {
      double sigma_n = 0.0;
      ErrorModel err = cfg.error ? *cfg.error : ErrorModel::none();
      if (cfg.sigma_schedule) {
        sigma_n = accelerated_sigma(n, cfg.sigma_schedule->eta, cfg.sigma_schedule->t);
        err = ErrorModel::gaussian(sigma_n);
      }
      double h = cfg.fixed_h ? *cfg.fixed_h : bandwidth(cfg.bw, n, err);

      std::vector<double> X = cfg.truth.sample(
          n, derive_seed(cfg.master_seed, {ni, static_cast<std::uint64_t>(rep), 0}));
      std::vector<double> U =
          err.sample(n, derive_seed(cfg.master_seed, {ni, static_cast<std::uint64_t>(rep), 1}));
      std::vector<double> W(n);
      for (std::size_t i = 0; i < n; ++i) W[i] = X[i] + U[i];

      auto [wmin_it, wmax_it] = std::minmax_element(W.begin(), W.end());
      double sig_eff = err.is_identity() ? 0.0 : err.sigma();
      double pad = std::max(70.0 * h, 4.0 * sig_eff);
      double lo = std::min(cfg.truth.quantile(5e-5) - pad, *wmin_it - pad);
      double hi = std::max(cfg.truth.quantile(1.0 - 5e-5) + pad, *wmax_it + pad);
      std::size_t points = next_pow2(
          std::max(cfg.grid_points,
                   static_cast<std::size_t>(4.0 * (hi - lo) / (M_PI * h))));
      if (points > (1u << 18)) throw std::runtime_error("cell grid would exceed 2^18 points");
      GridSpec gs{lo, hi, points, 8};

      Grid grid{lo, (hi - lo) / static_cast<double>(points), points};
      std::vector<double> truth_vals(points);
      for (std::size_t i = 0; i < points; ++i) truth_vals[i] = cfg.truth.pdf(grid.point(i));

      for (RateMethod m : cfg.methods) {
        std::vector<double> fitted;
        if (m == RateMethod::Dke) {
          DkeEstimate est = dke_fit(W, default_kernel(), err, h, gs);
          fitted = est.values;
        } else if (m == RateMethod::DpmmMean) {
          ChainConfig chain = cfg.chain;
          chain.seed = derive_seed(cfg.master_seed, {ni, static_cast<std::uint64_t>(rep), 2});
          auto truth_fn = cfg.truth.pdf_fn();
          PosteriorSummary ps = run_chain(W, err, cfg.prior, chain, grid, &truth_fn,
                                          cfg.p_list.front());
          fitted = ps.mean;
        } else {
          fitted = kde_of_w(W, grid);
        }
        for (double p : cfg.p_list) {
          double e = lp_distance(grid, fitted, truth_vals, p);
          out[c].rows.push_back(RateRow{n, rep, m, p, e, cell_seed, ""});
        }
      }
    } catch (const std::exception& ex) {
      emit_fail(ex.what());
    }
  });

  RateReport report;
  for (std::size_t c = 0; c < cells; ++c)
    for (auto& r : out[c].rows) report.rows.push_back(std::move(r));

  // slope fits per (method, p) over complete cells
  RateModel model = cfg.sigma_schedule || cfg.bw.regime == BandwidthRegime::Accelerated
                        ? RateModel::Polynomial
                        : RateModel::Supersmooth;
  for (RateMethod m : cfg.methods) {
    for (double p : cfg.p_list) {
      std::vector<std::size_t> ns;
      std::vector<std::vector<double>> errs;
      for (std::size_t ni = 0; ni < n_levels; ++ni) {
        std::vector<double> cell_errs;
        for (const auto& r : report.rows)
          if (r.n == cfg.n_grid[ni] && r.method == m && r.p == p && r.fail_reason.empty() &&
              r.error > 0.0)
            cell_errs.push_back(r.error);
        if (!cell_errs.empty()) {
          ns.push_back(cfg.n_grid[ni]);
          errs.push_back(std::move(cell_errs));
        }
      }
      if (ns.size() >= 4) {
        SlopeFit fit = fit_log_rate(ns, errs, model, 1000,
                                    derive_seed(cfg.master_seed, {0xb007, ns.size()}));
        report.fits.push_back(RateFitRow{m, p, model, fit});
      }
      if (m == cfg.methods.front() && p == cfg.p_list.front()) {
        report.median_by_n.clear();
        for (auto& e : errs) report.median_by_n.push_back(median_of(e));
      }
    }
  }
  return report;
}

} // namespace deconv
