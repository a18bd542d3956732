#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deconv/dke.hpp"
#include "deconv/dpmm.hpp"
#include "deconv/error_model.hpp"
#include "deconv/kernel.hpp"
#include "deconv/rates.hpp"

namespace deconv {

// Config validation failure carrying the complete list of problems.
struct config_error : std::runtime_error {
  explicit config_error(std::vector<std::string> errs);
  std::vector<std::string> errors;
};

struct TruthSpec {
  std::string kind = "gauss_mixture";  // gauss_mixture | heavy_tail | bspline2
  std::vector<double> weights = {0.5, 0.5};
  std::vector<double> means = {-1.0, 1.0};
  std::vector<double> sds = {0.5, 0.5};
  double c2 = 3.0;  // heavy_tail tail index
  double scale = 1.0;
  double center = 0.0;
};

struct ErrorSpec {
  std::string kind = "gaussian";  // gaussian | cauchy | none
  double sigma = 0.25;
  std::optional<EnvelopeParams> envelope;  // override of the built-in envelope
};

struct KernelSpec {
  double flat_radius = 0.5;
  std::string taper = "smooth_exp";  // smooth_exp | polynomial
  int taper_degree = 3;
};

struct BandwidthSpec {
  std::string regime = "supersmooth_lp";  // supersmooth_lp | supersmooth_sup | accelerated
  double gamma = 0.25;
  double eta = 2.0;
  double t_exponent = 1.15;
  double h = 0.0;  // > 0 overrides the schedule
};

struct GridCfg {
  std::size_t points = 4096;
  int pad_factor = 8;
  double xmin = std::numeric_limits<double>::quiet_NaN();
  double xmax = std::numeric_limits<double>::quiet_NaN();
};

struct PriorCfg {
  double alpha = 1.0;
  double mu0 = 0.0;
  double sigma0_sq = 0.0;  // 0 = 10 * var(W)
  double a = 1.0;
  double b = 1.0;
  int k_trunc = 0;  // 0 = auto
  std::string h_prior = "invgamma";  // invgamma | exponential
  double lambda = 1.0;
};

struct ChainCfg {
  int iters = 3000;
  int burnin = 1000;
  int thin = 2;
  double band_level = 0.90;
};

struct RatesCfg {
  std::vector<std::size_t> n_grid = {512, 2048, 8192, 32768};
  int reps = 20;
  std::vector<std::string> methods = {"dke"};
  std::vector<double> p_list = {2.0};
  bool use_sigma_schedule = false;
  double schedule_eta = 2.0;
  double schedule_t = 1.15;
  std::size_t grid_points = 2048;
};

struct ConcentrationCfg {
  std::string mode = "lemma1";  // lemma1 | deviation | dkw | plugin-test
  std::vector<double> h_grid = {0.8, 0.66, 0.55, 0.45, 0.37, 0.31};
  double p = 2.0;
  std::size_t n = 500;
  int reps = 200;
  double h = 0.4;
  double M1 = 1.0;
  double xi_n = 0.1;
};

struct SimulateCfg {
  std::size_t n = 1000;
};

struct DkeCfg {
  std::string input;  // sample CSV (one column)
  double h = 0.0;     // > 0 overrides the bandwidth schedule
};

struct FitDpmmCfg {
  std::string input;
  bool save_draws = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 12345;
  int threads = 0;
  TruthSpec truth;
  ErrorSpec error;
  KernelSpec kernel;
  BandwidthSpec bandwidth;
  GridCfg grid;
  PriorCfg prior;
  ChainCfg chain;
  RatesCfg rates;
  ConcentrationCfg concentration;
  SimulateCfg simulate;
  DkeCfg dke;
  FitDpmmCfg fit_dpmm;

  TrueDensity build_truth() const;
  ErrorModel build_error() const;
  DeconvKernel build_kernel() const;
  BandwidthSchedule build_bandwidth() const;
  GridSpec build_grid() const;
  DpmmPrior build_prior() const;
  ChainConfig build_chain() const;  // seed filled from `seed`
  RateConfig build_rates() const;

  nlohmann::json to_json() const;
  std::string canonical() const;  // single-line canonical dump
  std::uint64_t hash() const;

  // Parses and validates; collects every error instead of stopping at the first.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

} // namespace deconv
