#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deconv/dke.hpp"
#include "deconv/dpmm.hpp"
#include "deconv/error_model.hpp"

namespace deconv {

enum class TruthKind { GaussMixture, HeavyTail, Bspline2 };

// Tail certificate: polynomial  f(z) <= c1 |z|^{-c2} for |z| >= T, or
// exponential f(z) <= c1 exp(-c2 |z|^{c3}) for |z| >= T.
struct TailCertificate {
  bool polynomial = false;
  double c1 = 1.0;
  double c2 = 2.0;
  double c3 = 2.0;  // exponential certificates only
  double T = 1.0;
};

// A simulation truth: exact pdf/cdf/sampler plus declared smoothness label
// and tail certificate.
class TrueDensity {
public:
  double pdf(double x) const { return pdf_(x); }
  double cdf(double x) const { return cdf_(x); }
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const { return sample_(n, seed); }
  double quantile(double q) const;  // bisection on the cdf

  TruthKind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  double eta_declared() const { return eta_; }  // +inf for analytic truths
  const TailCertificate& tail() const { return tail_; }
  double mean() const { return mean_; }
  double sd() const { return sd_; }

  std::function<double(double)> pdf_fn() const { return pdf_; }

  friend TrueDensity make_gauss_mixture(const std::vector<double>&, const std::vector<double>&,
                                        const std::vector<double>&);
  friend TrueDensity make_heavy_tail(double, double, double);
  friend TrueDensity make_bspline2(double, double);

private:
  TruthKind kind_ = TruthKind::GaussMixture;
  std::string id_;
  double eta_ = std::numeric_limits<double>::infinity();
  TailCertificate tail_;
  double mean_ = 0.0, sd_ = 1.0;
  std::function<double(double)> pdf_, cdf_;
  std::function<std::vector<double>(std::size_t, std::uint64_t)> sample_;
};

TrueDensity make_gauss_mixture(const std::vector<double>& weights,
                               const std::vector<double>& means,
                               const std::vector<double>& sds);

// Student-t with tail index c2 = nu + 1 (polynomial tails, Theorem-1 regime).
TrueDensity make_heavy_tail(double c2, double scale = 1.0, double center = 0.0);

// Quadratic B-spline (three convolved uniforms): piecewise quadratic, C^1,
// bounded discontinuous second derivative — the kink-controlled eta = 2
// surrogate used in the accelerated regime.
TrueDensity make_bspline2(double scale = 1.0, double center = 0.0);

// Theorem-3 validity bound: t > (2 + 1/eta + 1/c3) / (2 + 1/eta).
double accelerated_t_bound(double eta, double c3);
void validate_accelerated_t(double eta, double t, double c3);

enum class RateMethod { Dke, DpmmMean, KdeW };
std::string method_name(RateMethod m);

enum class RateModel { Supersmooth, Polynomial };

struct SigmaSchedule {
  double eta = 2.0;
  double t = 1.15;
};

struct RateConfig {
  TrueDensity truth;
  std::optional<ErrorModel> error;            // fixed-sigma mode
  std::optional<SigmaSchedule> sigma_schedule;  // accelerated mode (Gaussian error)
  std::vector<std::size_t> n_grid;
  int reps = 20;
  std::vector<RateMethod> methods = {RateMethod::Dke};
  std::vector<double> p_list = {2.0};
  BandwidthSchedule bw;
  std::optional<double> fixed_h;
  DpmmPrior prior;
  ChainConfig chain;
  std::size_t grid_points = 2048;
  std::uint64_t master_seed = 1;
};

struct RateRow {
  std::size_t n = 0;
  int rep = 0;
  RateMethod method = RateMethod::Dke;
  double p = 2.0;
  double error = 0.0;
  std::uint64_t seed = 0;
  std::string fail_reason;  // nonempty marks a quarantined cell
};

struct SlopeFit {
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct RateFitRow {
  RateMethod method;
  double p;
  RateModel model;
  SlopeFit fit;
};

struct RateReport {
  std::vector<RateRow> rows;
  std::vector<RateFitRow> fits;
  Grid eval_grid;
  std::vector<double> median_by_n;  // first method/p combination, for quick checks
};

// Full factorial (n, replicate, method, p) experiment.  Cells run in
// parallel with per-cell seeds derived from the master seed; rows are emitted
// in cell-key order, so output is reproducible regardless of scheduling.
// Failed cells are quarantined with a reason and excluded from fits.
RateReport run_rate_experiment(const RateConfig& cfg);

// Least-squares slope of log(error) against log(log n) (Supersmooth) or
// log(n) (Polynomial), with a replicate-bootstrap percentile CI.
SlopeFit fit_log_rate(const std::vector<std::size_t>& ns,
                      const std::vector<std::vector<double>>& errors_by_n, RateModel model,
                      int bootstrap = 1000, std::uint64_t seed = 7);

// Ordinary Gaussian-kernel KDE of W with Silverman bandwidth; the naive
// deconvolution-ignoring comparator.
std::vector<double> kde_of_w(std::span<const double> W, const Grid& grid,
                             double bandwidth = 0.0);

} // namespace deconv
