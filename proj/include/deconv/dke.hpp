#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "deconv/error_model.hpp"
#include "deconv/grid.hpp"
#include "deconv/kernel.hpp"

namespace deconv {

// Output grid request.  xmin/xmax NaN means "sample range plus
// max(pad_bandwidths * h, 4 sigma) padding"; points must be a power of two.
// pad_factor widens the internal FFT period to push the periodization alias
// out.  Band-limited kernels have slowly decaying spatial tails, so the
// default padding is far wider than the classical 5h; narrower grids trip the
// mass warning.
struct GridSpec {
  double xmin = std::numeric_limits<double>::quiet_NaN();
  double xmax = std::numeric_limits<double>::quiet_NaN();
  std::size_t points = 4096;
  int pad_factor = 8;
  double pad_bandwidths = 70.0;
};

struct DkeEstimate {
  Grid grid;
  std::vector<double> values;  // signed by nature; reported raw
  double h = 0.0;
  std::size_t n = 0;
  std::string kernel_id;
  std::string error_id;
  double imag_residue = 0.0;  // max |Im| discarded from the inverse FFT
  double mass = 0.0;          // trapezoid integral over the grid
  bool projected = false;     // true after clip-at-0 + renormalize
  std::vector<std::string> warnings;
};

// Empirical characteristic function phi_{n,W}(t) = n^-1 sum_j exp(i t W_j).
std::complex<double> empirical_cf(std::span<const double> W, double t);

// phi_{n,W} on the uniform grid t_k = k*dt, k = 0..m-1.  One sincos per
// observation, then a phase recurrence over k; observations are split into
// fixed blocks whose partials combine in block order, so the result is
// bit-identical for any thread count.
std::vector<std::complex<double>> empirical_cf_grid(std::span<const double> W, double dt,
                                                    std::size_t m);

namespace serial {
// Naive reference: one complex exponential per (observation, frequency).
std::vector<std::complex<double>> empirical_cf_grid(std::span<const double> W, double dt,
                                                    std::size_t m);
} // namespace serial

// The deconvoluting kernel density estimator on a grid, computed in the
// frequency domain (integrand supported on |t| <= 1/h) and inverted by FFT.
DkeEstimate dke_fit(std::span<const double> W, const DeconvKernel& kernel,
                    const ErrorModel& error, double h, const GridSpec& spec = {},
                    double magnitude_cap = 1e8);

// Pointwise kernel-sum form f(x) = n^-1 sum_j h^-1 K_n{(x - W_j)/h}; the
// independent oracle for dke_fit.
double dke_eval_direct(std::span<const double> W, const DeconvKernel& kernel,
                       const ErrorModel& error, double h, double x, int points = 0,
                       double magnitude_cap = 1e8);

std::vector<double> dke_direct_grid(std::span<const double> W, const DeconvKernel& kernel,
                                    const ErrorModel& error, double h, const Grid& g,
                                    int points = 0);
namespace serial {
std::vector<double> dke_direct_grid(std::span<const double> W, const DeconvKernel& kernel,
                                    const ErrorModel& error, double h, const Grid& g,
                                    int points = 0);
} // namespace serial

// Optional post-projection: clip negative values at 0 and renormalize to unit
// mass.  Always labeled via DkeEstimate::projected.
void clip_and_renormalize(DkeEstimate& est);

enum class BandwidthRegime { SupersmoothLp, SupersmoothSup, Accelerated };

struct BandwidthSchedule {
  BandwidthRegime regime = BandwidthRegime::SupersmoothLp;
  double gamma = 0.25;      // free experiment knob; validity range (0,1)
  double eta = 2.0;         // Accelerated only: declared smoothness
  double t_exponent = 1.15; // Accelerated only
};

// Supersmooth Lp:  h = {2/(gamma*varrho)}^{1/beta} (log n)^{-1/beta}
// Supersmooth sup: h = {4/(gamma*varrho)}^{1/beta} (log n)^{-1/beta}
// Accelerated:     h = sigma_n with unit constant
double bandwidth(const BandwidthSchedule& schedule, std::size_t n, const ErrorModel& error);

// sigma_n = n^{-1/(2*eta+1)} (log n)^{t/eta}, unit constant.
double accelerated_sigma(std::size_t n, double eta, double t);

// L_p distance of two functions sampled on a shared grid; p in [2, inf].
double lp_distance(const Grid& g, std::span<const double> f, std::span<const double> g2,
                   double p);
double lp_distance(const Grid& gf, std::span<const double> f, const Grid& gg,
                   std::span<const double> g2, double p);

} // namespace deconv
