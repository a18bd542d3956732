#include <cmath>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "deconv/concentration.hpp"
#include "deconv/config.hpp"
#include "deconv/csv.hpp"
#include "deconv/parallel.hpp"
#include "deconv/version.hpp"

namespace fs = std::filesystem;
using namespace deconv;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::size_t n_override = 0;
  double sigma_override = 0.0;
  double h_override = 0.0;
  double p_override = 0.0;
};

ExperimentConfig load_config(const CliOptions& opt) {
  ExperimentConfig cfg =
      opt.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (opt.threads > 0) cfg.threads = opt.threads;
  if (opt.n_override > 0) cfg.simulate.n = opt.n_override;
  if (opt.sigma_override > 0.0) cfg.error.sigma = opt.sigma_override;
  if (opt.h_override > 0.0) {
    cfg.bandwidth.h = opt.h_override;
    cfg.dke.h = opt.h_override;
    cfg.concentration.h = opt.h_override;
  }
  if (opt.p_override > 0.0) {
    cfg.concentration.p = opt.p_override;
    cfg.rates.p_list = {opt.p_override};
  }
  return cfg;
}

std::vector<std::string> meta_block(const ExperimentConfig& cfg) {
  return csv_meta(cfg.hash(), cfg.seed, cfg.canonical());
}

fs::path ensure_out(const CliOptions& opt) {
  fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  return dir;
}

double resolve_h(const ExperimentConfig& cfg, std::size_t n, const ErrorModel& err) {
  if (cfg.dke.h > 0.0) return cfg.dke.h;
  if (cfg.bandwidth.h > 0.0) return cfg.bandwidth.h;
  return bandwidth(cfg.build_bandwidth(), n, err);
}

int cmd_simulate(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  set_threads(cfg.threads);
  TrueDensity truth = cfg.build_truth();
  ErrorModel err = cfg.build_error();
  std::size_t n = cfg.simulate.n;
  std::vector<double> X = truth.sample(n, derive_seed(cfg.seed, {0}));
  std::vector<double> U = err.sample(n, derive_seed(cfg.seed, {1}));
  CsvWriter w(ensure_out(opt) / "W.csv", meta_block(cfg), {"w"});
  for (std::size_t i = 0; i < n; ++i) w.row({CsvWriter::num(X[i] + U[i])});
  w.commit();
  return 0;
}

int cmd_estimate_dke(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  set_threads(cfg.threads);
  if (cfg.dke.input.empty())
    throw std::invalid_argument("estimate-dke: config needs dke.input (sample CSV)");
  std::vector<double> W = read_csv_column(cfg.dke.input);
  if (W.empty()) throw std::runtime_error("estimate-dke: empty sample file");
  ErrorModel err = cfg.build_error();
  DeconvKernel kernel = cfg.build_kernel();
  double h = resolve_h(cfg, W.size(), err);
  DkeEstimate est = dke_fit(W, kernel, err, h, cfg.build_grid());
  auto meta = meta_block(cfg);
  meta.push_back("h: " + CsvWriter::num(est.h));
  meta.push_back("mass: " + CsvWriter::num(est.mass));
  for (const auto& warn : est.warnings) meta.push_back("warning: " + warn);
  CsvWriter w(ensure_out(opt) / "dke.csv", meta, {"x", "fhat"});
  for (std::size_t i = 0; i < est.grid.n; ++i)
    w.row({CsvWriter::num(est.grid.point(i)), CsvWriter::num(est.values[i])});
  w.commit();
  return 0;
}

int cmd_fit_dpmm(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  set_threads(cfg.threads);
  if (cfg.fit_dpmm.input.empty())
    throw std::invalid_argument("fit-dpmm: config needs fit_dpmm.input (sample CSV)");
  std::vector<double> W = read_csv_column(cfg.fit_dpmm.input);
  if (W.empty()) throw std::runtime_error("fit-dpmm: empty sample file");
  ErrorModel err = cfg.build_error();
  auto [wmin, wmax] = std::minmax_element(W.begin(), W.end());
  double sig = err.is_identity() ? 0.0 : err.sigma();
  double lo = std::isnan(cfg.grid.xmin) ? *wmin - 4.0 * sig - 1.0 : cfg.grid.xmin;
  double hi = std::isnan(cfg.grid.xmax) ? *wmax + 4.0 * sig + 1.0 : cfg.grid.xmax;
  Grid grid = make_grid(lo, hi, cfg.grid.points);
  std::vector<std::vector<double>> draws;
  PosteriorSummary ps = run_chain(W, err, cfg.build_prior(), cfg.build_chain(), grid, nullptr,
                                  2.0, cfg.fit_dpmm.save_draws ? &draws : nullptr);
  fs::path dir = ensure_out(opt);
  auto meta = meta_block(cfg);
  meta.push_back("kept_draws: " + CsvWriter::num(ps.kept));
  meta.push_back("accept_rate_x: " + CsvWriter::num(ps.accept_rate_x));
  meta.push_back("accept_rate_h: " + CsvWriter::num(ps.accept_rate_h));
  meta.push_back("mass: " + CsvWriter::num(ps.mass));
  CsvWriter w(dir / "dpmm_summary.csv", meta, {"x", "mean", "band_lo", "band_hi"});
  for (std::size_t i = 0; i < grid.n; ++i)
    w.row({CsvWriter::num(grid.point(i)), CsvWriter::num(ps.mean[i]),
           CsvWriter::num(ps.band_lo[i]), CsvWriter::num(ps.band_hi[i])});
  w.commit();
  if (cfg.fit_dpmm.save_draws) {
    std::vector<std::string> cols(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) cols[i] = "x" + std::to_string(i);
    CsvWriter d(dir / "dpmm_draws.csv", meta_block(cfg), cols);
    std::vector<std::string> cells(grid.n);
    for (const auto& row : draws) {
      for (std::size_t i = 0; i < grid.n; ++i) cells[i] = CsvWriter::num(row[i]);
      d.row(cells);
    }
    d.commit();
  }
  return 0;
}

int cmd_rates(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  set_threads(cfg.threads);
  RateReport report = run_rate_experiment(cfg.build_rates());
  fs::path dir = ensure_out(opt);

  CsvWriter rep(dir / "report.csv", meta_block(cfg), {"n", "rep", "method", "p", "error", "seed"});
  CsvWriter fails(dir / "failures.csv", meta_block(cfg), {"n", "rep", "method", "p", "reason"});
  for (const auto& r : report.rows) {
    if (r.fail_reason.empty())
      rep.row({CsvWriter::num(r.n), CsvWriter::num(r.rep), method_name(r.method),
               CsvWriter::num(r.p), CsvWriter::num(r.error), CsvWriter::num(r.seed)});
    else
      fails.row({CsvWriter::num(r.n), CsvWriter::num(r.rep), method_name(r.method),
                 CsvWriter::num(r.p), r.fail_reason});
  }
  rep.commit();
  fails.commit();

  CsvWriter fits(dir / "fits.csv", meta_block(cfg), {"method", "model", "slope", "ci_lo", "ci_hi"});
  for (const auto& f : report.fits)
    fits.row({method_name(f.method),
              f.model == RateModel::Supersmooth ? "supersmooth" : "polynomial",
              CsvWriter::num(f.fit.slope), CsvWriter::num(f.fit.ci_lo),
              CsvWriter::num(f.fit.ci_hi)});
  fits.commit();

  // plot data: median error against n per (method, p)
  fs::create_directories(dir / "plotdata");
  RateConfig rc = cfg.build_rates();
  for (RateMethod m : rc.methods) {
    for (double p : rc.p_list) {
      std::ostringstream name;
      name << "median_" << method_name(m) << "_p" << (std::isinf(p) ? std::string("inf")
                                                                    : CsvWriter::num(p))
           << ".csv";
      CsvWriter pd(dir / "plotdata" / name.str(), meta_block(cfg), {"n", "median_error"});
      for (std::size_t ni = 0; ni < rc.n_grid.size(); ++ni) {
        std::vector<double> errs;
        for (const auto& r : report.rows)
          if (r.n == rc.n_grid[ni] && r.method == m && r.p == p && r.fail_reason.empty())
            errs.push_back(r.error);
        if (errs.empty()) continue;
        std::sort(errs.begin(), errs.end());
        double med = errs.size() % 2 ? errs[errs.size() / 2]
                                     : 0.5 * (errs[errs.size() / 2 - 1] + errs[errs.size() / 2]);
        pd.row({CsvWriter::num(rc.n_grid[ni]), CsvWriter::num(med)});
      }
      pd.commit();
    }
  }
  return 0;
}

int cmd_kernel_check(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  set_threads(cfg.threads);
  DeconvKernel kernel = cfg.build_kernel();
  ErrorModel err = cfg.build_error();
  fs::path dir = ensure_out(opt);

  Condition4Report c4 = condition4_check(kernel);
  auto meta = meta_block(cfg);
  meta.push_back("kernel: " + kernel.id());
  meta.push_back("cond4_sup_phiKprime_sq: " + CsvWriter::num(c4.sup_sq));
  meta.push_back("cond4_int_phiKprime_sq: " + CsvWriter::num(c4.integral_sq));

  CsvWriter mo(dir / "moments.csv", meta, {"r", "value", "err_estimate", "z_used"});
  for (int r = 0; r <= 6; ++r) {
    MomentResult m = kernel_moment(kernel, r);
    mo.row({CsvWriter::num(r), CsvWriter::num(m.value), CsvWriter::num(m.err_estimate),
            CsvWriter::num(m.z_used)});
  }
  mo.commit();

  CsvWriter pv(dir / "parseval.csv", meta_block(cfg),
               {"h", "lhs_spatial", "rhs_freq", "rel_residual"});
  for (double h : cfg.concentration.h_grid) {
    auto eval = kn_evaluator(kernel, err, h, 1 << 12);
    double lhs = std::pow(kn_lp_norm(*eval, 2.0), 2.0);
    double rhs = eval->l2_freq();
    pv.row({CsvWriter::num(h), CsvWriter::num(lhs), CsvWriter::num(rhs),
            CsvWriter::num(std::abs(lhs - rhs) / rhs)});
  }
  pv.commit();
  return 0;
}

int cmd_concentration(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  set_threads(cfg.threads);
  const ConcentrationCfg& cc = cfg.concentration;
  TrueDensity truth = cfg.build_truth();
  ErrorModel err = cfg.build_error();
  DeconvKernel kernel = cfg.build_kernel();
  fs::path dir = ensure_out(opt);

  if (cc.mode == "lemma1") {
    auto rows = check_lemma1_norm(kernel, err, cc.h_grid, cc.p);
    std::vector<double> lx, ly;
    for (const auto& r : rows) {
      lx.push_back(std::log(1.0 / r.h));
      ly.push_back(std::log(r.ratio));
    }
    TrendFit tf = trend_fit(lx, ly);
    auto meta = meta_block(cfg);
    meta.push_back("trend_slope: " + CsvWriter::num(tf.slope));
    meta.push_back("trend_ci_lo: " + CsvWriter::num(tf.ci_lo));
    meta.push_back("trend_ci_hi: " + CsvWriter::num(tf.ci_hi));
    CsvWriter w(dir / "lemma1.csv", meta, {"h", "norm", "bound", "ratio"});
    for (const auto& r : rows)
      w.row({CsvWriter::num(r.h), CsvWriter::num(r.norm), CsvWriter::num(r.bound),
             CsvWriter::num(r.ratio)});
    w.commit();
  } else if (cc.mode == "deviation") {
    EmpiricalTailFit fit =
        mc_deviation(truth, kernel, err, cc.h, cc.n, cc.reps, cc.p, derive_seed(cfg.seed, {2}));
    auto meta = meta_block(cfg);
    meta.push_back("mean_dev: " + CsvWriter::num(fit.mean_dev));
    meta.push_back("se_mean: " + CsvWriter::num(fit.se_mean));
    meta.push_back("decay_rate: " + CsvWriter::num(fit.decay_rate));
    meta.push_back("rng_seed: " + CsvWriter::num(fit.seed));
    CsvWriter w(dir / "deviation.csv", meta, {"threshold", "exceed_prob"});
    for (std::size_t i = 0; i < fit.thresholds.size(); ++i)
      w.row({CsvWriter::num(fit.thresholds[i]), CsvWriter::num(fit.exceed_prob[i])});
    w.commit();
  } else if (cc.mode == "dkw") {
    DkwResult res = dkw_supnorm_check(truth, err, cc.n, cc.reps, derive_seed(cfg.seed, {3}));
    auto meta = meta_block(cfg);
    meta.push_back("median_sup: " + CsvWriter::num(res.median_sup));
    meta.push_back("fitted_exponent: " + CsvWriter::num(res.fitted_exponent));
    meta.push_back(std::string("exponent_ok: ") + (res.exponent_ok ? "true" : "false"));
    meta.push_back("rng_seed: " + CsvWriter::num(res.fit.seed));
    CsvWriter w(dir / "dkw.csv", meta, {"lambda", "exceed_prob"});
    for (std::size_t i = 0; i < res.fit.thresholds.size(); ++i)
      w.row({CsvWriter::num(res.fit.thresholds[i]), CsvWriter::num(res.fit.exceed_prob[i])});
    w.commit();
  } else {  // plugin-test
    std::vector<double> X = truth.sample(cc.n, derive_seed(cfg.seed, {4, 0}));
    std::vector<double> U = err.sample(cc.n, derive_seed(cfg.seed, {4, 1}));
    std::vector<double> W(cc.n);
    for (std::size_t i = 0; i < cc.n; ++i) W[i] = X[i] + U[i];
    double sig = err.is_identity() ? 0.0 : err.sigma();
    double pad = std::max(70.0 * cc.h, 4.0 * sig) + 1.0;
    auto [wmin, wmax] = std::minmax_element(W.begin(), W.end());
    double lo = std::min(truth.quantile(5e-5), *wmin) - pad;
    double hi = std::max(truth.quantile(1.0 - 5e-5), *wmax) + pad;
    std::size_t points = cfg.grid.points;
    Grid grid{lo, (hi - lo) / static_cast<double>(points), points};
    std::vector<double> f0(points);
    for (std::size_t i = 0; i < points; ++i) f0[i] = truth.pdf(grid.point(i));
    bool rejected = plugin_test(W, grid, f0, kernel, err, cc.h, cc.M1, cc.xi_n, cc.p);
    GridSpec gs{lo, lo + grid.dx * static_cast<double>(points), points, 8};
    DkeEstimate est = dke_fit(W, kernel, err, cc.h, gs);
    double dist = lp_distance(grid, est.values, f0, cc.p);
    CsvWriter w(dir / "plugin.csv", meta_block(cfg),
                {"n", "distance", "threshold", "rejected"});
    w.row({CsvWriter::num(cc.n), CsvWriter::num(dist), CsvWriter::num(cc.M1 * cc.xi_n),
           rejected ? "1" : "0"});
    w.commit();
  }
  return 0;
}

void emit_error_json(const std::string& kind, const std::string& message, int code) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  j["code"] = code;
  std::cerr << j.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " - density deconvolution with supersmooth errors (DKE + DPMM)"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help and exit");
  app.set_version_flag("--version", std::string(kVersion));

  CliOptions opt;
  app.add_option("--config", opt.config_path, "experiment config file (JSON)");
  app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", opt.seed, "master seed (overrides config)")
      ->each([&](const std::string&) { opt.seed_set = true; });
  app.add_option("--threads", opt.threads, "worker threads (0 = auto, env DECONV_THREADS)");
  app.add_option("--n", opt.n_override, "sample size override");
  app.add_option("--sigma", opt.sigma_override, "error scale override");
  app.add_option("--h", opt.h_override, "bandwidth override");
  app.add_option("--p", opt.p_override, "norm order override");

  app.add_subcommand("simulate", "draw W = X + U and write W.csv")->fallthrough();
  app.add_subcommand("estimate-dke", "deconvoluting kernel density estimate -> dke.csv")
      ->fallthrough();
  app.add_subcommand("fit-dpmm", "DPMM posterior by blocked Gibbs -> dpmm_summary.csv")
      ->fallthrough();
  app.add_subcommand("rates", "convergence-rate experiment -> report.csv, fits.csv")
      ->fallthrough();
  app.add_subcommand("kernel-check", "kernel moments and Parseval residuals")->fallthrough();
  app.add_subcommand("concentration",
                     "concentration diagnostics (lemma1|deviation|dkw|plugin-test)")
      ->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    emit_error_json("usage", e.what(), 2);
    return 2;
  }

  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(opt);
    if (app.got_subcommand("estimate-dke")) return cmd_estimate_dke(opt);
    if (app.got_subcommand("fit-dpmm")) return cmd_fit_dpmm(opt);
    if (app.got_subcommand("rates")) return cmd_rates(opt);
    if (app.got_subcommand("kernel-check")) return cmd_kernel_check(opt);
    if (app.got_subcommand("concentration")) return cmd_concentration(opt);
  } catch (const config_error& e) {
    emit_error_json("config", e.what(), 2);
    return 2;
  } catch (const std::invalid_argument& e) {
    emit_error_json("config", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    emit_error_json("runtime", e.what(), 1);
    return 1;
  }
  return 0;
}
