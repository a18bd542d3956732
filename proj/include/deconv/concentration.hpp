#pragma once

#include <cstdint>
#include <vector>

#include "deconv/dke.hpp"
#include "deconv/error_model.hpp"
#include "deconv/kernel.hpp"
#include "deconv/rates.hpp"

namespace deconv {

// Exponent functions controlling the concentration bounds:
//   varpi_p(b0)   = -(1-1/p)        if b0 >= 0,  b0-(1-1/p) otherwise   (2 <= p < inf)
//   varpi_inf(b0) = -1              if b0 >= 0,  b0-1       otherwise
//   varpi_sup(b0) = -1              if b0 >= 1/2, 4*b0-4    otherwise
struct VarpiExponents {
  double varpi_p;
  double varpi_inf;
  double varpi_sup;
};

VarpiExponents varpi(double p, double beta0);

struct Lemma1Row {
  double h;
  double norm;   // ||K~_n||_p by spatial quadrature
  double bound;  // h^{varpi_p(beta0)} exp(h^{-beta}/varrho)
  double ratio;
};

// Numerical check of the Lemma-1 envelope: the ratios must stay bounded as
// h decreases.
std::vector<Lemma1Row> check_lemma1_norm(const DeconvKernel& kernel, const ErrorModel& error,
                                         const std::vector<double>& h_grid, double p);

// OLS slope of y on x with a normal-theory CI (2 standard errors).
struct TrendFit {
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};
TrendFit trend_fit(const std::vector<double>& x, const std::vector<double>& y);

struct EmpiricalTailFit {
  std::vector<double> thresholds;   // geometric ladder, 12 rungs, 50th-99.5th pct
  std::vector<double> exceed_prob;  // monotone nonincreasing
  double decay_rate = 0.0;          // b in log P ~ a - b * x (x = lambda or lambda^2)
  double decay_intercept = 0.0;
  double mean_dev = 0.0;
  double se_mean = 0.0;
  double median = 0.0;
  std::uint64_t seed = 0;
};

// Monte Carlo deviations ||f_{n,X} - mean_MC f_{n,X}||_p over `reps`
// replicate fits; exceedance frequencies over the threshold ladder with a
// fitted exponential decay (log P against lambda).
EmpiricalTailFit mc_deviation(const TrueDensity& truth, const DeconvKernel& kernel,
                              const ErrorModel& error, double h, std::size_t n, int reps,
                              double p, std::uint64_t seed);

struct DkwResult {
  EmpiricalTailFit fit;          // thresholds are lambda = sqrt(n) * sup-distance,
                                 // decay fitted as log P ~ a - c * lambda^2
  std::vector<double> sups;      // per-replicate sup-distances
  double median_sup = 0.0;       // median sup-distance
  bool exponent_ok = false;      // fitted c >= required fraction of the DKW constant 2
  double fitted_exponent = 0.0;
};

// Empirical sup-distance between the true and empirical cdf of W = X + U,
// with a sub-Gaussian tail fit.
DkwResult dkw_supnorm_check(const TrueDensity& truth, const ErrorModel& error, std::size_t n,
                            int reps, std::uint64_t seed, double required_fraction = 0.5);

// Plug-in test Phi_n = 1{ ||f_{n,X} - f_{0X}||_p > M1 * xi_n }.
bool plugin_test(std::span<const double> W, const Grid& grid, std::span<const double> f0X,
                 const DeconvKernel& kernel, const ErrorModel& error, double h, double M1,
                 double xi_n, double p);

} // namespace deconv
