#include <doctest.h>

#include "deconv/concentration.hpp"
#include "test_utils.hpp"

using namespace deconv;

TEST_CASE("varpi piecewise exponents on a (p, beta0) lattice") {
  // hand-derived values
  CHECK(varpi(2.0, 0.0).varpi_p == doctest::Approx(-0.5));
  CHECK(varpi(std::numeric_limits<double>::infinity(), -1.0).varpi_inf ==
        doctest::Approx(-2.0));
  CHECK(varpi(2.0, 0.5).varpi_sup == doctest::Approx(-1.0));

  for (double p : {2.0, 3.0, 4.0, 8.0, std::numeric_limits<double>::infinity()}) {
    for (double b0 : {-2.0, -1.0, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0}) {
      VarpiExponents v = varpi(p, b0);
      double one_m = std::isinf(p) ? 1.0 : 1.0 - 1.0 / p;
      CHECK(v.varpi_p == doctest::Approx(b0 >= 0.0 ? -one_m : b0 - one_m));
      CHECK(v.varpi_inf == doctest::Approx(b0 >= 0.0 ? -1.0 : b0 - 1.0));
      CHECK(v.varpi_sup == doctest::Approx(b0 >= 0.5 ? -1.0 : 4.0 * b0 - 4.0));
    }
  }
  CHECK_THROWS_AS(varpi(1.5, 0.0), std::invalid_argument);
}

TEST_CASE("lemma-1 ratio table") {
  DeconvKernel k = default_kernel();
  std::vector<double> hg{0.8, 0.66, 0.55, 0.45, 0.37, 0.31};

  SUBCASE("identity error: ratio is the constant ||K||_p") {
    ErrorModel none = ErrorModel::none();
    auto rows = check_lemma1_norm(k, none, {0.8, 0.55, 0.37}, 2.0);
    // bound collapses to h^{-(1-1/p)}; ratio = ||K||_2 for every h
    for (const auto& r : rows)
      CHECK(r.ratio == doctest::Approx(rows.front().ratio).epsilon(1e-6));
  }
  SUBCASE("Gaussian error, p in {2, inf}: ratios bounded with no upward trend") {
    ErrorModel g = ErrorModel::gaussian(0.4);
    for (double p : {2.0, std::numeric_limits<double>::infinity()}) {
      auto rows = check_lemma1_norm(k, g, hg, p);
      std::vector<double> lx, ly;
      for (const auto& r : rows) {
        CHECK(std::isfinite(r.ratio));
        CHECK(r.ratio > 0.0);
        lx.push_back(std::log(1.0 / r.h));
        ly.push_back(std::log(r.ratio));
      }
      TrendFit tf = trend_fit(lx, ly);
      CHECK(tf.ci_lo <= 0.0);
    }
  }
  SUBCASE("deterministic given config") {
    ErrorModel g = ErrorModel::gaussian(0.4);
    auto a = check_lemma1_norm(k, g, hg, 2.0);
    auto b = check_lemma1_norm(k, g, hg, 2.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].ratio == b[i].ratio);
  }
  SUBCASE("grid must decrease") {
    CHECK_THROWS_AS(check_lemma1_norm(k, ErrorModel::gaussian(0.4), {0.3, 0.5}, 2.0),
                    std::invalid_argument);
  }
}

TEST_CASE("lemma-1 ratios for a Cauchy error at p = 4") {
  auto rows = check_lemma1_norm(default_kernel(), ErrorModel::cauchy(0.4),
                                {0.8, 0.6, 0.45}, 4.0);
  std::vector<double> lx, ly;
  for (const auto& r : rows) {
    lx.push_back(std::log(1.0 / r.h));
    ly.push_back(std::log(r.ratio));
  }
  CHECK(trend_fit(lx, ly).ci_lo <= 0.0);
}

TEST_CASE("mc_deviation: scaling, monotone ecdf, SE halving") {
  TrueDensity truth = make_gauss_mixture({0.5, 0.5}, {-1.0, 1.0}, {0.5, 0.5});
  DeconvKernel k = default_kernel();
  ErrorModel err = ErrorModel::gaussian(0.25);
  const double h = 0.4;

  CHECK_THROWS_AS(mc_deviation(truth, k, err, h, 100, 50, 2.0, 1), std::invalid_argument);

  EmpiricalTailFit f500 = mc_deviation(truth, k, err, h, 500, 200, 2.0, 11);
  EmpiricalTailFit f2000 = mc_deviation(truth, k, err, h, 2000, 200, 2.0, 22);

  for (std::size_t i = 0; i < f500.thresholds.size(); ++i) {
    CHECK(f500.exceed_prob[i] >= 0.0);
    CHECK(f500.exceed_prob[i] <= 1.0);
    if (i > 0) CHECK(f500.exceed_prob[i] <= f500.exceed_prob[i - 1] + 1e-12);
  }

  // Lemma-3 shape: mean deviation ~ C n^{-1/2} h^{varpi_2} exp(h^{-beta}/rho);
  // the fitted constant must be stable across n (+-50%)
  const EnvelopeParams& e = err.envelope();
  auto bound = [&](std::size_t n) {
    return std::pow(static_cast<double>(n), -0.5) * std::pow(h, varpi(2.0, e.beta0).varpi_p) *
           std::exp(std::pow(h, -e.beta) / e.varrho);
  };
  double c500 = f500.mean_dev / bound(500);
  double c2000 = f2000.mean_dev / bound(2000);
  CHECK(c2000 / c500 > 0.5);
  CHECK(c2000 / c500 < 1.5);

  EmpiricalTailFit f400 = mc_deviation(truth, k, err, h, 500, 400, 2.0, 33);
  double se_ratio = f500.se_mean / f400.se_mean;
  CHECK(se_ratio > std::sqrt(2.0) * 0.7);
  CHECK(se_ratio < std::sqrt(2.0) * 1.3);
}

TEST_CASE("dkw sup-norm concentration") {
  TrueDensity truth = make_gauss_mixture({0.5, 0.5}, {-1.0, 1.0}, {0.5, 0.5});
  ErrorModel err = ErrorModel::gaussian(0.3);

  CHECK_THROWS_AS(dkw_supnorm_check(truth, err, 100, 100, 1), std::invalid_argument);

  DkwResult r1 = dkw_supnorm_check(truth, err, 500, 400, 404);
  DkwResult r4 = dkw_supnorm_check(truth, err, 2000, 400, 808);

  // sub-Gaussian tail: fitted exponent at least half of the DKW constant 2
  CHECK(r1.fitted_exponent >= 1.0);
  CHECK(r1.exponent_ok);

  // n -> 4n shrinks the median sup-distance by about 2 (+-20%)
  double ratio = r1.median_sup / r4.median_sup;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("dkw statistic is distribution-free over truths") {
  // F continuous implies sup|F - F_n| has a distribution not depending on
  // the truth: Gaussian-truth and Cauchy-truth runs must agree (two-sample
  // KS test on the per-replicate statistics).
  ErrorModel err = ErrorModel::gaussian(0.3);
  TrueDensity gauss = make_gauss_mixture({1.0}, {0.0}, {1.0});
  TrueDensity cauchy = make_heavy_tail(2.0, 1.0, 0.0);  // c2 = 2: Cauchy
  DkwResult a = dkw_supnorm_check(gauss, err, 400, 300, 17);
  DkwResult b = dkw_supnorm_check(cauchy, err, 400, 300, 18);
  CHECK(testutil::ks_two_sample_pvalue(a.sups, b.sups) > 0.01);
}

TEST_CASE("plug-in test") {
  TrueDensity truth = make_gauss_mixture({0.5, 0.5}, {-1.0, 1.0}, {0.5, 0.5});
  ErrorModel err = ErrorModel::gaussian(0.25);
  DeconvKernel k = default_kernel();
  const double h = 0.35;
  Grid grid = make_grid(-30.0, 30.0, 2048);
  std::vector<double> f0(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) f0[i] = truth.pdf(grid.point(i));

  auto W_h0 = [&](std::uint64_t seed) {
    auto X = truth.sample(600, derive_seed(seed, {0}));
    auto U = err.sample(600, derive_seed(seed, {1}));
    std::vector<double> W(600);
    for (int i = 0; i < 600; ++i) W[i] = X[i] + U[i];
    return W;
  };

  SUBCASE("threshold dominates under H0 with huge M1") {
    CHECK_FALSE(plugin_test(W_h0(1), grid, f0, k, err, h, 1e6, 0.1, 2.0));
  }
  SUBCASE("distant truth with tiny M1 rejects") {
    TrueDensity far = make_gauss_mixture({1.0}, {6.0}, {0.3});
    auto X = far.sample(600, 11);
    auto U = err.sample(600, 12);
    std::vector<double> W(600);
    for (int i = 0; i < 600; ++i) W[i] = X[i] + U[i];
    CHECK(plugin_test(W, grid, f0, k, err, h, 1e-4, 0.1, 2.0));
  }
  SUBCASE("grid mismatch rejected") {
    std::vector<double> short_f0(grid.n - 1);
    CHECK_THROWS_AS(plugin_test(W_h0(1), grid, short_f0, k, err, h, 1.0, 0.1, 2.0),
                    std::invalid_argument);
  }
  SUBCASE("H0 rejection frequency decreases with n") {
    // xi_n = (log n)^{-eta/beta} with eta = 2, beta = 2; fixed M1
    const double M1 = 1.4;
    std::vector<double> freq;
    for (std::size_t n : {256, 1024, 4096}) {
      int rejections = 0;
      const int reps = 200;
      double xi = 1.0 / std::log(static_cast<double>(n));
      double hn = bandwidth({BandwidthRegime::SupersmoothLp, 0.25}, n, err);
      for (int r = 0; r < reps; ++r) {
        auto X = truth.sample(n, derive_seed(4000 + n, {static_cast<std::uint64_t>(r), 0}));
        auto U = err.sample(n, derive_seed(4000 + n, {static_cast<std::uint64_t>(r), 1}));
        std::vector<double> W(n);
        for (std::size_t i = 0; i < n; ++i) W[i] = X[i] + U[i];
        rejections += plugin_test(W, grid, f0, k, err, hn, M1, xi, 2.0) ? 1 : 0;
      }
      freq.push_back(static_cast<double>(rejections) / reps);
    }
    CHECK(freq.back() < freq.front());
  }
}
