#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "deconv/error_model.hpp"
#include "deconv/grid.hpp"
#include "deconv/rng.hpp"

namespace deconv {

enum class HPriorKind { InvGammaOnH2, ExponentialOnH };

// DPMM prior: stick-breaking weights pi_k = S_k prod_{l<k}(1-S_l) with
// S_l ~ Beta(1, alpha), atoms mu_k ~ Normal(mu0, sigma0_sq), and either an
// Inv-Ga(a, b) prior on h^2 (conjugate) or an Exp(lambda) prior on h
// (accelerated-regime runs, Metropolis update).
struct DpmmPrior {
  double alpha = 1.0;
  double mu0 = 0.0;
  double sigma0_sq = 0.0;  // <= 0 means 10 * var(W), resolved at chain start
  double a = 1.0;
  double b = 1.0;
  int k_trunc = 0;  // 0 means auto: smallest K with {alpha/(1+alpha)}^K < 1e-6
  HPriorKind h_prior = HPriorKind::InvGammaOnH2;
  double lambda = 1.0;
};

int default_k_trunc(double alpha, double target = 1e-6);

// One MCMC state.  The stick construction leaves residual mass
// prod_k (1 - S_k); that mass is carried by one extra component whose atom is
// a draw from the base measure, so f_X integrates to 1 exactly and the
// blocked sweep is exactly invariant at any truncation level.
struct DpmmState {
  std::vector<double> sticks;   // S_1..S_K in (0,1)
  std::vector<double> weights;  // pi_k, recomputed from sticks
  double residual = 0.0;        // prod(1 - S_l)
  std::vector<double> atoms;    // mu_1..mu_K
  double residual_atom = 0.0;
  double h = 1.0;
  std::vector<int> alloc;       // z_i in [0, K]; K = residual component
  std::vector<double> latent;   // x_i
  double step_x = 0.5;          // Metropolis steps, tuned during burn-in only
  double step_h = 0.3;

  void refresh_weights();
  int k_trunc() const { return static_cast<int>(atoms.size()); }
};

DpmmState prior_draw(const DpmmPrior& prior, Rng& rng);
DpmmState prior_draw(const DpmmPrior& prior, std::uint64_t seed);

// Prior draw plus allocations and latent true values for n observations;
// data then follow as W_i = x_i + U_i.
DpmmState generative_draw(const DpmmPrior& prior, std::size_t n, Rng& rng);

double density_fX(const DpmmState& state, double x);
// f_W = f_X * psi_sigma: closed form for Gaussian errors, numeric convolution
// on a cached Gauss-Hermite rule otherwise.
double density_fW(const DpmmState& state, const ErrorModel& error, double w);

struct GibbsStats {
  std::uint64_t accept_x = 0, try_x = 0;
  std::uint64_t accept_h = 0, try_h = 0;
};

// One full blocked sweep: latents, allocations, sticks, atoms, h.
void gibbs_step(DpmmState& state, std::span<const double> W, const ErrorModel& error,
                const DpmmPrior& prior, Rng& rng, bool tune, GibbsStats* stats = nullptr);

struct ChainConfig {
  int iters = 3000;
  int burnin = 1000;
  int thin = 2;
  std::uint64_t seed = 1;
  double band_level = 0.90;
};

struct PosteriorSummary {
  Grid grid;
  std::vector<double> mean;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
  std::vector<double> lp_errors;  // per kept draw, empty without a truth
  double accept_rate_x = 1.0;
  double accept_rate_h = 1.0;
  int kept = 0;
  double mass = 0.0;
  DpmmPrior effective_prior;
};

PosteriorSummary run_chain(std::span<const double> W, const ErrorModel& error,
                           const DpmmPrior& prior, const ChainConfig& chain, const Grid& grid,
                           const std::function<double(double)>* truth_pdf = nullptr,
                           double p = 2.0,
                           std::vector<std::vector<double>>* draws_out = nullptr);

struct DivergenceResult {
  double kl = 0.0;         // int f0 log(f0/f)
  double kl2 = 0.0;        // int f0 log^2(f0/f)
  double hellinger = 0.0;  // {int (sqrt f0 - sqrt f)^2}^{1/2}
  int floored = 0;         // density-ratio floor hits
};

DivergenceResult divergences(const std::function<double(double)>& f0,
                             const std::function<double(double)>& f, double lo, double hi,
                             int n = 1 << 12, double floor_eps = 1e-12);

} // namespace deconv
