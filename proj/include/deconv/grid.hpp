#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace deconv {

// Uniform grid x_i = x0 + i*dx, i = 0..n-1.
struct Grid {
  double x0 = 0.0;
  double dx = 1.0;
  std::size_t n = 0;

  double point(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
  double back() const { return point(n - 1); }

  std::vector<double> points() const {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = point(i);
    return p;
  }

  bool same_as(const Grid& o) const {
    return n == o.n && std::abs(x0 - o.x0) < 1e-12 * (1.0 + std::abs(x0)) &&
           std::abs(dx - o.dx) < 1e-12 * dx;
  }
};

inline Grid make_grid(double xmin, double xmax, std::size_t n) {
  if (n < 2 || !(xmax > xmin)) throw std::invalid_argument("grid: need n >= 2 and xmax > xmin");
  return Grid{xmin, (xmax - xmin) / static_cast<double>(n - 1), n};
}

// Trapezoid integral of samples over the grid.
inline double trapezoid(const Grid& g, std::span<const double> f) {
  if (f.size() != g.n) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * g.dx;
}

} // namespace deconv
