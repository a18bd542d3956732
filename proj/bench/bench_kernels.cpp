// Benchmark: OpenMP kernels against their serial reference twins.
//   bench_kernels [n] [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "deconv/dke.hpp"
#include "deconv/parallel.hpp"
#include "deconv/rates.hpp"

using namespace deconv;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    fn();
    auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s) {
  std::printf("%-28s serial %8.4fs   omp %8.4fs   speedup %.2fx\n", name, serial_s,
              parallel_s, serial_s / parallel_s);
}

} // namespace

int main(int argc, char** argv) {
  std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
  int threads = argc > 2 ? std::atoi(argv[2]) : 0;
  set_threads(threads);
  std::printf("bench: n = %zu, threads = %d\n", n, resolve_threads(threads));

  TrueDensity truth = make_gauss_mixture({0.5, 0.5}, {-1.0, 1.0}, {0.5, 0.5});
  ErrorModel err = ErrorModel::gaussian(0.25);
  auto X = truth.sample(n, 1);
  auto U = err.sample(n, 2);
  std::vector<double> W(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = X[i] + U[i];

  {
    const double dt = 0.01;
    const std::size_t m = 1024;
    double ts = time_best_of(3, [&] { (void)serial::empirical_cf_grid(W, dt, m); });
    double tp = time_best_of(3, [&] { (void)empirical_cf_grid(W, dt, m); });
    report("empirical_cf_grid (1024 t)", ts, tp);
  }
  {
    auto eval = kn_evaluator(default_kernel(), err, 0.3, 1 << 13);
    Grid g = make_grid(-20.0, 20.0, 2048);
    double ts = time_best_of(3, [&] { (void)serial::kn_values(*eval, g); });
    double tp = time_best_of(3, [&] { (void)kn_values(*eval, g); });
    report("K_n grid (2048 pts)", ts, tp);
  }
  {
    std::vector<double> Wsmall(W.begin(), W.begin() + std::min<std::size_t>(n, 400));
    Grid g = make_grid(-4.0, 4.0, 128);
    double ts = time_best_of(3, [&] {
      (void)serial::dke_direct_grid(Wsmall, default_kernel(), err, 0.35, g, 1 << 12);
    });
    double tp = time_best_of(3, [&] {
      (void)dke_direct_grid(Wsmall, default_kernel(), err, 0.35, g, 1 << 12);
    });
    report("direct DKE grid (128 pts)", ts, tp);
  }
  {
    // replicate-level parallelism: 64 small fits
    auto run = [&](bool par) {
      auto body = [&](std::size_t r) {
        auto Xr = truth.sample(500, derive_seed(9, {r, 0}));
        auto Ur = err.sample(500, derive_seed(9, {r, 1}));
        std::vector<double> Wr(500);
        for (std::size_t i = 0; i < 500; ++i) Wr[i] = Xr[i] + Ur[i];
        GridSpec gs{-8.0, 8.0, 1024, 8};
        (void)dke_fit(Wr, default_kernel(), err, 0.3, gs);
      };
      if (par)
        parallel_for_dynamic(64, body);
      else
        for (std::size_t r = 0; r < 64; ++r) body(r);
    };
    double ts = time_best_of(2, [&] { run(false); });
    double tp = time_best_of(2, [&] { run(true); });
    report("64 replicate DKE fits", ts, tp);
  }
  return 0;
}
