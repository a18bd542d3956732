#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "deconv/error_model.hpp"
#include "deconv/grid.hpp"

namespace deconv {

enum class TaperKind { Polynomial, SmoothExp };

struct bandwidth_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deconvolution kernel K given through its Fourier transform phi_K:
// phi_K == 1 on [-c, c] (flat top), smooth monotone taper to 0 at |t| = 1,
// 0 outside [-1, 1].  The flat top annihilates all polynomial moments, so one
// kernel serves every smoothness order; compact support makes the frequency
// truncation in the DKE exact.
//
// Polynomial taper of degree m: phi_K = indicator * (m-fold uniform
// convolution), a piecewise degree-m polynomial with C^{m-1} joins and a
// closed-form spatial kernel K(z) = sin(C0 z)/(pi z) * sinc(b z)^m.
// SmoothExp taper: C-infinity bump transition; K only via quadrature.
class DeconvKernel {
public:
  DeconvKernel(double flat_radius, TaperKind taper, int degree = 3);

  double phi(double t) const;        // phi_K(t)
  double phi_prime(double t) const;  // d phi_K / dt
  double eval(double z) const;       // K(z) = (2*pi)^-1 int e^{-itz} phi_K(t) dt

  double flat_radius() const { return flat_radius_; }
  TaperKind taper() const { return taper_; }
  int degree() const { return degree_; }
  const std::string& id() const { return id_; }
  // phi_K samples on [0, 1], quad_points() + 1 nodes; shared by all quadratures.
  const std::vector<double>& phi_cache() const { return phi_cache_; }
  int quad_points() const { return quad_points_; }

private:
  double flat_radius_;
  TaperKind taper_;
  int degree_;
  int quad_points_;
  std::vector<double> phi_cache_;
  std::string id_;
};

DeconvKernel make_flat_top_kernel(double flat_radius, TaperKind taper, int degree = 3);
DeconvKernel default_kernel();  // flat_radius 0.5, Polynomial taper, degree 8

// Effective deconvolution kernel K_n for one (kernel, error, h):
//   K_n(x) = (2*pi)^-1 int e^{-itx} phi_K(t) / phi_sigma(t/h) dt.
// G(t) = phi_K(t)/phi_sigma(t/h) is sampled once on [0, 1]; evaluation and
// derivative are trapezoid sums over the cached samples (exact up to aliasing
// since G is compactly supported).
class KnEvaluator {
public:
  KnEvaluator(const DeconvKernel& kernel, const ErrorModel& error, double h,
              int points = 0, double magnitude_cap = 1e8);

  double operator()(double z) const;
  double deriv(double z) const;  // K_n'(z) from g_K(t) = (2*pi)^-1 i t phi_K(t)/phi_sigma(t/h)
  double sup_bound() const;      // (2*pi)^-1 int |phi_K/phi_sigma(./h)|
  double l2_freq() const;        // (2*pi)^-1 int |phi_K/phi_sigma(./h)|^2  (Parseval RHS)
  double bandwidth() const { return h_; }

private:
  std::vector<double> g_re_, g_im_;
  double dt_;
  int np_;
  double h_;
};

// Cached evaluators keyed by exact (kernel, error, h, points); thread-safe fills.
std::shared_ptr<const KnEvaluator> kn_evaluator(const DeconvKernel& kernel,
                                                const ErrorModel& error, double h,
                                                int points = 0,
                                                double magnitude_cap = 1e8);

double eval_Kn(const DeconvKernel& kernel, const ErrorModel& error, double h, double x,
               int points = 0, double magnitude_cap = 1e8);

// K_n on a grid; OpenMP-parallel over points with a serial reference twin.
std::vector<double> kn_values(const KnEvaluator& eval, const Grid& g);
std::vector<double> kn_deriv_values(const KnEvaluator& eval, const Grid& g);
namespace serial {
std::vector<double> kn_values(const KnEvaluator& eval, const Grid& g);
std::vector<double> kn_deriv_values(const KnEvaluator& eval, const Grid& g);
} // namespace serial

struct MomentQuad {
  double dz = 0.0;         // spatial step; 0 = per-taper default (dz < pi is alias-exact)
  double zmax = 4e6;       // hard cap on the window
  double tail_tol = 1e-7;  // target bound for the truncated oscillating tail
};

struct MomentResult {
  double value = 0.0;
  double err_estimate = 0.0;  // half-resolution Richardson difference + last block
  bool converged = true;
  double z_used = 0.0;
};

// Numerically integrated r-th moment int z^r K(z) dz over a symmetric window
// that grows until the tail contribution is negligible.
MomentResult kernel_moment(const DeconvKernel& kernel, int r, const MomentQuad& q = {});

// int |z|^s |K(z)| dz on the same adaptive window (Condition-type absolute moments).
MomentResult kernel_abs_moment(const DeconvKernel& kernel, double s, const MomentQuad& q = {});

// Total variation V_n = int |K_n'(x)| dx; cells with a sign change are split
// at the interpolated zero so the |.| kink costs O(dz^3), not O(dz^2).
double total_variation_Kn(const DeconvKernel& kernel, const ErrorModel& error, double h,
                          double dz = 0.02, double zmax = 2400.0, int points = 0);

// ||K_n||_p by spatial quadrature (p = inf -> sup over the window).
double kn_lp_norm(const KnEvaluator& eval, double p, double dz = 0.02, double zmax = 2400.0);

// Condition 4 diagnostics: sup_{|t|<=1} |phi_K'|^2 and int |phi_K'|^2.
struct Condition4Report {
  double sup_sq;
  double integral_sq;
};
Condition4Report condition4_check(const DeconvKernel& kernel);

} // namespace deconv
