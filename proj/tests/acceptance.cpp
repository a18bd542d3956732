// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.  Exit code = number of
// failures.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "deconv/concentration.hpp"
#include "deconv/config.hpp"
#include "deconv/csv.hpp"
#include "deconv/dpmm.hpp"
#include "deconv/rates.hpp"
#include "test_utils.hpp"

using namespace deconv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << what;
    }
  }
};

std::vector<double> contaminated(const TrueDensity& truth, const ErrorModel& err,
                                 std::size_t n, std::uint64_t seed) {
  auto X = truth.sample(n, derive_seed(seed, {0}));
  auto U = err.sample(n, derive_seed(seed, {1}));
  std::vector<double> W(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = X[i] + U[i];
  return W;
}

TrueDensity bimodal() { return make_gauss_mixture({0.5, 0.5}, {-1.0, 1.0}, {0.5, 0.5}); }

// ---------------------------------------------------------------------------
// 1. Kernel conditions: unit mass to 1e-8, moments r=1..6 vanish to 1e-6.
bool c1_kernel_conditions(Check& c) {
  DeconvKernel k = default_kernel();
  MomentResult m0 = kernel_moment(k, 0);
  c.require(std::abs(m0.value - 1.0) <= 1e-8,
            "int K = " + std::to_string(m0.value) + " not within 1e-8 of 1");
  for (int r = 1; r <= 6; ++r) {
    MomentResult mr = kernel_moment(k, r);
    c.require(std::abs(mr.value) <= 1e-6,
              "int z^" + std::to_string(r) + " K = " + std::to_string(mr.value));
  }
  return c.ok;
}

// 2. FFT fit and direct kernel sum agree to 1e-6 at 20 points x 5 scenarios.
bool c2_oracle_equivalence(Check& c) {
  struct Scenario {
    TrueDensity truth;
    ErrorModel err;
    double h;
    std::size_t n;
  };
  std::vector<Scenario> scenarios;
  scenarios.push_back({bimodal(), ErrorModel::gaussian(0.3), 0.35, 200});
  scenarios.push_back({bimodal(), ErrorModel::gaussian(0.5), 0.50, 150});
  scenarios.push_back({bimodal(), ErrorModel::cauchy(0.3), 0.40, 120});
  scenarios.push_back({make_bspline2(2.0), ErrorModel::gaussian(0.4), 0.45, 200});
  scenarios.push_back({make_heavy_tail(4.0), ErrorModel::cauchy(0.25), 0.50, 100});
  DeconvKernel k = default_kernel();
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& sc = scenarios[s];
    auto W = contaminated(sc.truth, sc.err, sc.n, 7000 + s);
    DkeEstimate est = dke_fit(W, k, sc.err, sc.h, {});
    Rng rng = make_rng(100 + s);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      std::size_t idx = rng() % est.grid.n;
      double direct = dke_eval_direct(W, k, sc.err, sc.h, est.grid.point(idx));
      worst = std::max(worst, std::abs(direct - est.values[idx]));
    }
    c.require(worst <= 1e-6,
              "scenario " + std::to_string(s) + ": worst |fit - direct| = " +
                  std::to_string(worst));
  }
  return c.ok;
}

// 3. No-error identity: DKE == ordinary KDE with kernel K (1e-8 sup norm);
//    the DPMM sweep with fixed latents reduces to a standard sweep.
bool c3_no_error_identity(Check& c) {
  ErrorModel none = ErrorModel::none();
  DeconvKernel k = default_kernel();
  TrueDensity truth = bimodal();
  auto W = contaminated(truth, none, 150, 9001);
  const double h = 0.3;
  GridSpec gs;
  gs.points = 1024;
  DkeEstimate est = dke_fit(W, k, none, h, gs);
  double worst = 0.0;
  for (std::size_t i = 0; i < est.grid.n; i += 4) {
    double x = est.grid.point(i), kde = 0.0;
    for (double w : W) kde += k.eval((x - w) / h);
    kde /= static_cast<double>(W.size()) * h;
    worst = std::max(worst, std::abs(kde - est.values[i]));
  }
  c.require(worst <= 1e-8, "sup |DKE - KDE| = " + std::to_string(worst));

  // DPMM: identity error pins the latents to W; the sweep must then match a
  // standard DPMM density-estimation sweep on the same RNG stream.
  DpmmPrior prior;
  prior.k_trunc = 4;
  prior.sigma0_sq = 3.0;
  DpmmState st = prior_draw(prior, 5150);
  st.latent.assign(W.begin(), W.end());
  st.alloc.assign(W.size(), 0);
  DpmmState ref = st;
  Rng ra = make_rng(777), rb = make_rng(777);
  gibbs_step(st, W, none, prior, ra, false);
  {
    const int K = ref.k_trunc();
    double h2 = ref.h * ref.h;
    std::vector<int> counts(K + 1, 0);
    std::vector<double> probs(K + 1);
    for (std::size_t i = 0; i < W.size(); ++i) {
      double best = -1e300;
      for (int kk = 0; kk <= K; ++kk) {
        double w = kk < K ? ref.weights[kk] : ref.residual;
        double mu = kk < K ? ref.atoms[kk] : ref.residual_atom;
        probs[kk] = (w > 0 ? std::log(w) : -1e300) -
                    0.5 * std::log(2.0 * M_PI * h2) -
                    0.5 * (W[i] - mu) * (W[i] - mu) / h2;
        best = std::max(best, probs[kk]);
      }
      for (int kk = 0; kk <= K; ++kk) probs[kk] = std::exp(probs[kk] - best);
      int z = draw_categorical(rb, probs);
      ref.alloc[i] = z;
      ++counts[z];
    }
    std::vector<int> beyond(K + 1, 0);
    for (int kk = K - 1; kk >= 0; --kk) beyond[kk] = beyond[kk + 1] + counts[kk + 1];
    for (int kk = 0; kk < K; ++kk)
      ref.sticks[kk] = draw_beta(rb, 1.0 + counts[kk], prior.alpha + beyond[kk]);
    ref.refresh_weights();
    std::vector<double> sums(K + 1, 0.0);
    for (std::size_t i = 0; i < W.size(); ++i) sums[ref.alloc[i]] += W[i];
    auto draw_atom = [&](int kk) {
      if (counts[kk] == 0) return draw_normal(rb, prior.mu0, std::sqrt(prior.sigma0_sq));
      double v = 1.0 / (1.0 / prior.sigma0_sq + counts[kk] / h2);
      return draw_normal(rb, v * (prior.mu0 / prior.sigma0_sq + sums[kk] / h2), std::sqrt(v));
    };
    for (int kk = 0; kk < K; ++kk) ref.atoms[kk] = draw_atom(kk);
    ref.residual_atom = draw_atom(K);
    double sse = 0.0;
    for (std::size_t i = 0; i < W.size(); ++i) {
      double mu = ref.alloc[i] < K ? ref.atoms[ref.alloc[i]] : ref.residual_atom;
      sse += (W[i] - mu) * (W[i] - mu);
    }
    ref.h = std::sqrt(draw_inv_gamma(rb, prior.a + 0.5 * W.size(), prior.b + 0.5 * sse));
  }
  c.require(st.alloc == ref.alloc && st.h == ref.h && st.sticks == ref.sticks &&
                st.atoms == ref.atoms,
            "DPMM sweep does not reduce to the standard sweep on fixed latents");
  return c.ok;
}

// 4. Bias law: MC mean of the DKE matches f0X * Ktilde within 3 MC SEs at 30
//    points; the quadrature bias decreases along a dyadic h-grid.
bool c4_bias_law(Check& c) {
  std::vector<double> wts{0.5, 0.5}, mus{-1.0, 1.0}, sds{0.5, 0.5};
  TrueDensity truth = make_gauss_mixture(wts, mus, sds);
  ErrorModel err = ErrorModel::gaussian(0.3);
  DeconvKernel k = default_kernel();
  const double h = 0.5;
  const int R = 200;
  const std::size_t n = 500;
  GridSpec gs{-6.0, 6.0, 2048, 8};
  Grid grid{-6.0, 12.0 / 2048, 2048};
  std::vector<std::vector<double>> fits(R);
  for (int r = 0; r < R; ++r) {
    auto W = contaminated(truth, err, n, derive_seed(310, {static_cast<std::uint64_t>(r)}));
    fits[r] = dke_fit(W, k, err, h, gs).values;
  }
  auto smoothed = [&](double hh, double x) {
    return testutil::gl_integrate(
               [&](double t) {
                 double pk = k.phi(t * hh);
                 if (pk == 0.0) return 0.0;
                 std::complex<double> cf(0.0, 0.0);
                 for (std::size_t j = 0; j < wts.size(); ++j)
                   cf += wts[j] * std::exp(std::complex<double>(
                                      -0.5 * sds[j] * sds[j] * t * t, mus[j] * t));
                 return (cf * std::exp(std::complex<double>(0.0, -t * x))).real() * pk;
               },
               0.0, 1.0 / hh, 64) /
           M_PI;
  };
  int beyond = 0;
  for (int j = 0; j < 30; ++j) {
    std::size_t idx = 300 + static_cast<std::size_t>(j) * 50;
    std::vector<double> col(R);
    for (int r = 0; r < R; ++r) col[r] = fits[r][idx];
    double m = testutil::mean_of(col);
    double se = testutil::sd_of(col) / std::sqrt(static_cast<double>(R));
    if (std::abs(m - smoothed(h, grid.point(idx))) > 3.0 * se) ++beyond;
  }
  c.require(beyond == 0, std::to_string(beyond) + " of 30 points beyond 3 MC SEs");

  double prev = 1e18;
  for (double hh : {0.8, 0.4, 0.2, 0.1}) {
    double l2 = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) {
      double d = smoothed(hh, grid.point(i)) - truth.pdf(grid.point(i));
      l2 += d * d * ((i == 0 || i + 1 == grid.n) ? 0.5 : 1.0);
    }
    l2 = std::sqrt(l2 * grid.dx);
    c.require(l2 < prev, "quadrature bias not decreasing at h = " + std::to_string(hh));
    prev = l2;
  }
  return c.ok;
}

// 5. Supersmooth consistency trend.
bool c5_supersmooth_trend(Check& c) {
  RateConfig cfg{.truth = bimodal()};
  cfg.error = ErrorModel::gaussian(0.25);
  cfg.n_grid = {512, 2048, 8192, 32768};
  cfg.reps = 20;
  cfg.methods = {RateMethod::Dke};
  cfg.p_list = {2.0};
  cfg.bw = BandwidthSchedule{BandwidthRegime::SupersmoothLp, 0.25};
  cfg.master_seed = 2024;
  RateReport rep = run_rate_experiment(cfg);
  c.require(rep.median_by_n.size() == 4, "missing n-levels");
  for (std::size_t i = 1; i < rep.median_by_n.size(); ++i)
    c.require(rep.median_by_n[i] < rep.median_by_n[i - 1],
              "median L2 error not strictly decreasing at level " + std::to_string(i));
  c.require(!rep.fits.empty(), "no slope fit");
  if (!rep.fits.empty()) {
    const SlopeFit& f = rep.fits.front().fit;
    c.require(f.slope < 0.0 && f.ci_hi < 0.0,
              "supersmooth slope CI does not exclude 0: [" + std::to_string(f.ci_lo) + ", " +
                  std::to_string(f.ci_hi) + "]");
  }
  return c.ok;
}

// 6. Accelerated regime: fitted polynomial slope within 0.15 of -0.4.
bool c6_accelerated_rate(Check& c) {
  RateConfig cfg{.truth = make_bspline2(2.0)};
  cfg.sigma_schedule = SigmaSchedule{2.0, 1.15};
  cfg.n_grid = {1024, 4096, 16384, 65536};
  cfg.reps = 20;
  cfg.methods = {RateMethod::Dke};
  cfg.p_list = {2.0};
  cfg.bw = BandwidthSchedule{BandwidthRegime::Accelerated, 0.25, 2.0, 1.15};
  cfg.master_seed = 77;
  RateReport rep = run_rate_experiment(cfg);
  c.require(!rep.fits.empty(), "no slope fit");
  if (!rep.fits.empty()) {
    double slope = rep.fits.front().fit.slope;
    c.require(std::abs(slope - (-0.4)) <= 0.15,
              "polynomial slope " + std::to_string(slope) + " not within 0.15 of -0.4");
  }
  return c.ok;
}

// 7. Sampler validity: Geweke moments within 4 MC SEs, stick identity to
//    1e-12 each sweep, posterior mean mass within 1e-3.
bool c7_sampler_validity(Check& c) {
  DpmmPrior prior;
  prior.alpha = 1.0;
  prior.sigma0_sq = 2.0;
  prior.a = 3.0;
  prior.b = 2.0;
  prior.k_trunc = 3;
  ErrorModel err = ErrorModel::gaussian(0.5);
  const std::size_t n = 3;
  const int M = 120000;

  Rng rng1 = make_rng(101);
  std::vector<double> h1, p1, m1;
  for (int i = 0; i < M; ++i) {
    DpmmState st = prior_draw(prior, rng1);
    h1.push_back(st.h);
    p1.push_back(st.weights[0]);
    m1.push_back(st.atoms[0]);
  }
  Rng rng2 = make_rng(202);
  DpmmState st = generative_draw(prior, n, rng2);
  std::vector<double> W(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = st.latent[i] + draw_normal(rng2, 0.0, 0.5);
  std::vector<double> h2, p2, m2;
  double worst_stick = 0.0;
  for (int it = 0; it < M; ++it) {
    gibbs_step(st, W, err, prior, rng2, false);
    double carry = 1.0;
    for (std::size_t k = 0; k < st.sticks.size(); ++k) {
      worst_stick = std::max(worst_stick, std::abs(st.weights[k] - st.sticks[k] * carry));
      carry *= 1.0 - st.sticks[k];
    }
    for (std::size_t i = 0; i < n; ++i) W[i] = st.latent[i] + draw_normal(rng2, 0.0, 0.5);
    h2.push_back(st.h);
    p2.push_back(st.weights[0]);
    m2.push_back(st.atoms[0]);
  }
  c.require(worst_stick <= 1e-12,
            "stick identity violated: " + std::to_string(worst_stick));
  auto compare = [&](const std::vector<double>& a, const std::vector<double>& b,
                     const char* name) {
    auto sa = testutil::batch_stat(a), sb = testutil::batch_stat(b);
    double z = std::abs(sa.mean - sb.mean) / std::sqrt(sa.se * sa.se + sb.se * sb.se);
    c.require(z <= 4.0, std::string("Geweke |z| for ") + name + " = " + std::to_string(z));
  };
  compare(h1, h2, "h");
  compare(p1, p2, "pi_1");
  compare(m1, m2, "mu_1");

  TrueDensity truth = bimodal();
  ErrorModel e2 = ErrorModel::gaussian(0.25);
  auto Wc = contaminated(truth, e2, 500, 4004);
  Grid grid = make_grid(-4.5, 4.5, 512);
  PosteriorSummary ps = run_chain(Wc, e2, DpmmPrior{}, ChainConfig{1500, 500, 2, 11}, grid);
  c.require(std::abs(ps.mass - 1.0) <= 1e-3,
            "posterior mean mass " + std::to_string(ps.mass));
  for (double v : ps.mean)
    if (v < 0.0) c.require(false, "negative posterior mean density");
  return c.ok;
}

// 8. DPMM posterior mean beats the naive KDE-of-W in at least 8 of 10
//    replicates at n = 2000, sigma = 0.3 (and its median error is lower).
bool c8_dpmm_beats_naive(Check& c) {
  TrueDensity truth = bimodal();
  ErrorModel err = ErrorModel::gaussian(0.3);
  Grid grid = make_grid(-4.0, 4.0, 1024);
  std::vector<double> truth_vals(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) truth_vals[i] = truth.pdf(grid.point(i));
  int wins = 0;
  std::vector<double> dpmm_errs, kde_errs;
  for (int rep = 0; rep < 10; ++rep) {
    auto W = contaminated(truth, err, 2000, derive_seed(5000, {static_cast<std::uint64_t>(rep)}));
    ChainConfig chain{3000, 1000, 2, derive_seed(5001, {static_cast<std::uint64_t>(rep)})};
    PosteriorSummary ps = run_chain(W, err, DpmmPrior{}, chain, grid);
    double de = lp_distance(grid, ps.mean, truth_vals, 2.0);
    double ke = lp_distance(grid, kde_of_w(W, grid), truth_vals, 2.0);
    dpmm_errs.push_back(de);
    kde_errs.push_back(ke);
    if (de < ke) ++wins;
  }
  c.require(wins >= 8, "DPMM beat the naive KDE in only " + std::to_string(wins) + "/10");
  double med_d = testutil::median_of(dpmm_errs), med_k = testutil::median_of(kde_errs);
  c.require(med_d <= 1.1 * med_k, "median DPMM error exceeds naive KDE by more than 10%");
  return c.ok;
}

// 9. Concentration shapes: lemma-1 trend CI at p in {2, inf} allows no
//    positive slope; DKW tail decays at least like exp(-lambda^2); median
//    sup-distance scales as n^{-1/2} between n and 4n (within 20%).
bool c9_concentration_shapes(Check& c) {
  DeconvKernel k = default_kernel();
  ErrorModel err = ErrorModel::gaussian(0.4);
  std::vector<double> hg{0.8, 0.66, 0.55, 0.45, 0.37, 0.31};
  for (double p : {2.0, std::numeric_limits<double>::infinity()}) {
    auto rows = check_lemma1_norm(k, err, hg, p);
    std::vector<double> lx, ly;
    for (const auto& r : rows) {
      lx.push_back(std::log(1.0 / r.h));
      ly.push_back(std::log(r.ratio));
    }
    TrendFit tf = trend_fit(lx, ly);
    c.require(tf.ci_lo <= 0.0,
              "lemma1 p=" + std::string(std::isinf(p) ? "inf" : "2") +
                  ": slope CI excludes non-positive values");
  }
  TrueDensity truth = bimodal();
  ErrorModel derr = ErrorModel::gaussian(0.3);
  DkwResult r1 = dkw_supnorm_check(truth, derr, 500, 400, 404);
  DkwResult r4 = dkw_supnorm_check(truth, derr, 2000, 400, 808);
  c.require(r1.fitted_exponent >= 1.0,
            "DKW tail exponent " + std::to_string(r1.fitted_exponent) + " below 1");
  double ratio = r1.median_sup / r4.median_sup;
  c.require(ratio >= 1.6 && ratio <= 2.4,
            "median sup-distance n->4n ratio " + std::to_string(ratio));
  return c.ok;
}

// 10. Determinism: rerunning every subcommand with the same config and seed
//     produces bit-identical CSV bodies.
bool c10_determinism(Check& c) {
  const char* cli = DECONV_CLI_PATH;
  fs::path dir = fs::temp_directory_path() / "deconv_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  auto run = [&](const std::string& args) {
    std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };

  {
    std::ofstream cfg(dir / "rates.json");
    cfg << R"({"rates": {"n_grid": [64,128,256,512], "reps": 10, "methods": ["dke"],
               "grid_points": 1024}, "bandwidth": {"h": 0.35}, "seed": 5})";
  }
  {
    std::ofstream cfg(dir / "conc.json");
    cfg << R"({"concentration": {"mode": "dkw", "n": 300, "reps": 200}, "seed": 6})";
  }
  {
    std::ofstream cfg(dir / "dpmm.json");
    cfg << "{\"fit_dpmm\": {\"input\": \"" + (dir / "W.csv").string() +
               "\"}, \"chain\": {\"iters\": 500, \"burnin\": 200}, "
               "\"grid\": {\"points\": 256}, \"seed\": 7}";
  }
  {
    std::ofstream cfg(dir / "dke.json");
    cfg << "{\"dke\": {\"input\": \"" + (dir / "W.csv").string() +
               "\", \"h\": 0.4}, \"seed\": 8}";
  }

  struct Step {
    std::string args;
    std::vector<std::string> files;
  };
  std::vector<Step> steps = {
      {"simulate --seed 42 --n 400", {"W.csv"}},
      {"estimate-dke --config " + (dir / "dke.json").string(), {"dke.csv"}},
      {"fit-dpmm --config " + (dir / "dpmm.json").string(), {"dpmm_summary.csv"}},
      {"kernel-check", {"moments.csv", "parseval.csv"}},
      {"rates --config " + (dir / "rates.json").string(), {"report.csv", "fits.csv"}},
      {"concentration --config " + (dir / "conc.json").string(), {"dkw.csv"}},
  };
  for (const auto& step : steps) {
    std::string args = step.args + " --out " + dir.string();
    if (run(args) != 0) {
      c.require(false, "subcommand failed: " + step.args);
      continue;
    }
    std::vector<std::string> first;
    for (const auto& f : step.files) first.push_back(slurp(dir / f));
    if (run(args) != 0) {
      c.require(false, "rerun failed: " + step.args);
      continue;
    }
    for (std::size_t i = 0; i < step.files.size(); ++i)
      c.require(slurp(dir / step.files[i]) == first[i],
                step.files[i] + " differs between reruns");
  }
  return c.ok;
}

} // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<bool(Check&)> run;
  };
  std::vector<Criterion> criteria = {
      {1, "kernel-conditions", c1_kernel_conditions},
      {2, "oracle-equivalence", c2_oracle_equivalence},
      {3, "no-error-identity", c3_no_error_identity},
      {4, "bias-law", c4_bias_law},
      {5, "supersmooth-trend", c5_supersmooth_trend},
      {6, "accelerated-rate", c6_accelerated_rate},
      {7, "sampler-validity", c7_sampler_validity},
      {8, "dpmm-beats-naive", c8_dpmm_beats_naive},
      {9, "concentration-shapes", c9_concentration_shapes},
      {10, "determinism", c10_determinism},
  };
  int failures = 0;
  for (auto& cr : criteria) {
    Check check;
    auto t0 = Clock::now();
    bool ok = false;
    std::string what;
    try {
      ok = cr.run(check);
    } catch (const std::exception& e) {
      ok = false;
      what = std::string("exception: ") + e.what();
    }
    double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    std::string detail = what.empty() ? check.detail.str() : what;
    std::printf("[%s] %02d %-22s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, dt,
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
