#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace deconv {

// Uniform trapezoid with n+1 nodes on [a,b].
template <class F>
double trapezoid_rule(F&& f, double a, double b, int n) {
  double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

// Richardson-style self-check: value at 2n nodes plus |I_2n - I_n|.
template <class F>
std::pair<double, double> trapezoid_checked(F&& f, double a, double b, int n) {
  double coarse = trapezoid_rule(f, a, b, n);
  double fine = trapezoid_rule(f, a, b, 2 * n);
  return {fine, std::abs(fine - coarse)};
}

// Composite Simpson with n (even) intervals.
template <class F>
double simpson_rule(F&& f, double a, double b, int n) {
  if (n % 2) ++n;
  double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

namespace detail {
template <class F>
double adaptive_simpson_impl(F& f, double a, double b, double fa, double fm, double fb,
                             double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_impl(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson_impl(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}
} // namespace detail

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_impl(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Gauss-Hermite nodes/weights for \int e^{-u^2} g(u) du, by Newton iteration
// on the Hermite recurrence.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussHermite gauss_hermite(int n) {
  GaussHermite gh;
  gh.nodes.resize(n);
  gh.weights.resize(n);
  const double pi_quarter = std::pow(M_PI, -0.25);
  int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      z -= 1.14 * std::pow(n, 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * gh.nodes[n - 1];
    else if (i == 3)
      z = 1.91 * z - 0.91 * gh.nodes[n - 2];
    else
      z = 2.0 * z - gh.nodes[n - i + 1];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pi_quarter, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    gh.nodes[n - 1 - i] = z;
    gh.nodes[i] = -z;
    gh.weights[i] = 2.0 / (pp * pp);
    gh.weights[n - 1 - i] = gh.weights[i];
  }
  return gh;
}

} // namespace deconv
