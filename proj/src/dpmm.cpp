#include "deconv/dpmm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "deconv/dke.hpp"
#include "deconv/quadrature.hpp"

namespace deconv {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double normal_pdf(double x, double mean, double var) {
  return std::exp(log_normal_pdf(x, mean, var));
}

const GaussHermite& gh_rule() {
  static const GaussHermite gh = gauss_hermite(128);
  return gh;
}

void validate_prior(const DpmmPrior& p) {
  if (!(p.alpha > 0.0)) throw std::invalid_argument("dpmm: alpha must be positive");
  if (!(p.a > 0.0 && p.b > 0.0)) throw std::invalid_argument("dpmm: a, b must be positive");
  if (!(p.lambda > 0.0)) throw std::invalid_argument("dpmm: lambda must be positive");
}

} // namespace

int default_k_trunc(double alpha, double target) {
  // prior-expected residual mass {alpha/(1+alpha)}^K < target
  double r = alpha / (1.0 + alpha);
  int k = static_cast<int>(std::ceil(std::log(target) / std::log(r)));
  return std::max(k, 3);
}

void DpmmState::refresh_weights() {
  weights.resize(sticks.size());
  double carry = 1.0;
  for (std::size_t k = 0; k < sticks.size(); ++k) {
    weights[k] = sticks[k] * carry;
    carry *= (1.0 - sticks[k]);
  }
  residual = carry;
}

DpmmState prior_draw(const DpmmPrior& prior, Rng& rng) {
  validate_prior(prior);
  int K = prior.k_trunc > 0 ? prior.k_trunc : default_k_trunc(prior.alpha);
  double s0 = prior.sigma0_sq > 0.0 ? prior.sigma0_sq : 10.0;
  DpmmState st;
  st.sticks.resize(K);
  st.atoms.resize(K);
  for (int k = 0; k < K; ++k) {
    st.sticks[k] = draw_beta(rng, 1.0, prior.alpha);
    st.atoms[k] = draw_normal(rng, prior.mu0, std::sqrt(s0));
  }
  st.residual_atom = draw_normal(rng, prior.mu0, std::sqrt(s0));
  if (prior.h_prior == HPriorKind::InvGammaOnH2)
    st.h = std::sqrt(draw_inv_gamma(rng, prior.a, prior.b));
  else
    st.h = draw_exponential(rng, prior.lambda);
  st.refresh_weights();
  return st;
}

DpmmState prior_draw(const DpmmPrior& prior, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return prior_draw(prior, rng);
}

DpmmState generative_draw(const DpmmPrior& prior, std::size_t n, Rng& rng) {
  DpmmState st = prior_draw(prior, rng);
  int K = st.k_trunc();
  std::vector<double> w = st.weights;
  w.push_back(st.residual);
  st.alloc.resize(n);
  st.latent.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int z = draw_categorical(rng, w);
    st.alloc[i] = z;
    double mu = z < K ? st.atoms[z] : st.residual_atom;
    st.latent[i] = draw_normal(rng, mu, st.h);
  }
  return st;
}

double density_fX(const DpmmState& state, double x) {
  double h2 = state.h * state.h;
  double s = state.residual * normal_pdf(x, state.residual_atom, h2);
  for (std::size_t k = 0; k < state.atoms.size(); ++k)
    s += state.weights[k] * normal_pdf(x, state.atoms[k], h2);
  return s;
}

double density_fW(const DpmmState& state, const ErrorModel& error, double w) {
  double h2 = state.h * state.h;
  if (error.is_identity()) return density_fX(state, w);
  if (error.kind() == ErrorKind::Gaussian) {
    double var = h2 + error.sigma() * error.sigma();
    double s = state.residual * normal_pdf(w, state.residual_atom, var);
    for (std::size_t k = 0; k < state.atoms.size(); ++k)
      s += state.weights[k] * normal_pdf(w, state.atoms[k], var);
    return s;
  }
  // numeric convolution against Normal(mu_k, h^2) on the cached GH rule:
  // int Normal(x|mu,h^2) psi(w-x) dx = pi^{-1/2} sum_q w_q psi(w - mu - sqrt(2) h u_q)
  const GaussHermite& gh = gh_rule();
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  auto component = [&](double mu) {
    double acc = 0.0;
    for (std::size_t q = 0; q < gh.nodes.size(); ++q)
      acc += gh.weights[q] * error.pdf(w - mu - std::sqrt(2.0) * state.h * gh.nodes[q]);
    double v = acc * inv_sqrt_pi;
    if (!std::isfinite(v))
      throw std::runtime_error("density_fW: quadrature failure for custom error");
    return v;
  };
  double s = state.residual * component(state.residual_atom);
  for (std::size_t k = 0; k < state.atoms.size(); ++k)
    s += state.weights[k] * component(state.atoms[k]);
  return s;
}

void gibbs_step(DpmmState& state, std::span<const double> W, const ErrorModel& error,
                const DpmmPrior& prior, Rng& rng, bool tune, GibbsStats* stats) {
  validate_prior(prior);
  const std::size_t n = W.size();
  if (n == 0) throw std::invalid_argument("gibbs_step: empty sample");
  const int K = state.k_trunc();
  if (state.alloc.size() != n || state.latent.size() != n)
    throw std::invalid_argument("gibbs_step: state not sized for the sample");
  double s0 = prior.sigma0_sq > 0.0 ? prior.sigma0_sq : 10.0;

  auto atom_of = [&](int z) { return z < K ? state.atoms[z] : state.residual_atom; };

  // (i) latent true values x_i | z_i, W_i
  double h2 = state.h * state.h;
  std::uint64_t acc_x = 0;
  if (error.is_identity()) {
    for (std::size_t i = 0; i < n; ++i) state.latent[i] = W[i];
  } else if (error.kind() == ErrorKind::Gaussian) {
    double s2 = error.sigma() * error.sigma();
    double v = 1.0 / (1.0 / h2 + 1.0 / s2);
    double sd = std::sqrt(v);
    for (std::size_t i = 0; i < n; ++i) {
      double mu = atom_of(state.alloc[i]);
      double mean = v * (mu / h2 + W[i] / s2);
      state.latent[i] = draw_normal(rng, mean, sd);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double mu = atom_of(state.alloc[i]);
      double x = state.latent[i];
      double logp = std::log(error.pdf(W[i] - x)) + log_normal_pdf(x, mu, h2);
      double xp = x + state.step_x * draw_normal(rng);
      double logpp = std::log(error.pdf(W[i] - xp)) + log_normal_pdf(xp, mu, h2);
      if (std::log(draw_uniform(rng)) < logpp - logp) {
        state.latent[i] = xp;
        ++acc_x;
      }
    }
    if (stats) {
      stats->accept_x += acc_x;
      stats->try_x += n;
    }
    if (tune) {
      double rate = static_cast<double>(acc_x) / static_cast<double>(n);
      state.step_x *= std::exp(0.2 * (rate - 0.4));
      state.step_x = std::clamp(state.step_x, 1e-4, 1e4);
    }
  }

  // (ii) allocations over k <= K plus the residual component
  std::vector<double> logw(K + 1);
  std::vector<double> probs(K + 1);
  std::vector<int> counts(K + 1, 0);
  for (int k = 0; k < K; ++k)
    logw[k] = state.weights[k] > 0.0 ? std::log(state.weights[k]) : -1e300;
  logw[K] = state.residual > 0.0 ? std::log(state.residual) : -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    double x = state.latent[i];
    double best = -1e300;
    for (int k = 0; k <= K; ++k) {
      probs[k] = logw[k] + log_normal_pdf(x, atom_of(k), h2);
      best = std::max(best, probs[k]);
    }
    for (int k = 0; k <= K; ++k) probs[k] = std::exp(probs[k] - best);
    int z = draw_categorical(rng, probs);
    state.alloc[i] = z;
    ++counts[z];
  }

  // (iii) sticks S_k ~ Beta(1 + n_k, alpha + sum_{l > k} n_l); the residual
  // component counts as "beyond k" for every k
  std::vector<int> beyond(K + 1);
  beyond[K] = 0;
  for (int k = K - 1; k >= 0; --k) beyond[k] = beyond[k + 1] + counts[k + 1];
  for (int k = 0; k < K; ++k)
    state.sticks[k] = draw_beta(rng, 1.0 + counts[k], prior.alpha + beyond[k]);
  state.refresh_weights();

  // (iv) atoms mu_k by Normal-Normal conjugacy; empty clusters from the prior
  std::vector<double> sums(K + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) sums[state.alloc[i]] += state.latent[i];
  auto draw_atom = [&](int k) {
    if (counts[k] == 0) return draw_normal(rng, prior.mu0, std::sqrt(s0));
    double v = 1.0 / (1.0 / s0 + counts[k] / h2);
    double mean = v * (prior.mu0 / s0 + sums[k] / h2);
    return draw_normal(rng, mean, std::sqrt(v));
  };
  for (int k = 0; k < K; ++k) state.atoms[k] = draw_atom(k);
  state.residual_atom = draw_atom(K);

  // (v) bandwidth
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = state.latent[i] - atom_of(state.alloc[i]);
    sse += d * d;
  }
  if (prior.h_prior == HPriorKind::InvGammaOnH2) {
    double h2_new = draw_inv_gamma(rng, prior.a + 0.5 * n, prior.b + 0.5 * sse);
    state.h = std::sqrt(h2_new);
  } else {
    // Exp(lambda) prior on h: random-walk Metropolis on log h
    auto log_target = [&](double h) {
      return -static_cast<double>(n) * std::log(h) - 0.5 * sse / (h * h) - prior.lambda * h +
             std::log(h);  // log-scale Jacobian
    };
    double lh = std::log(state.h);
    double lhp = lh + state.step_h * draw_normal(rng);
    double hp = std::exp(lhp);
    bool acc = std::log(draw_uniform(rng)) < log_target(hp) - log_target(state.h);
    if (acc) state.h = hp;
    if (stats) {
      stats->accept_h += acc ? 1 : 0;
      stats->try_h += 1;
    }
    if (tune) {
      state.step_h *= std::exp(0.2 * ((acc ? 1.0 : 0.0) - 0.4));
      state.step_h = std::clamp(state.step_h, 1e-4, 1e2);
    }
  }
}

PosteriorSummary run_chain(std::span<const double> W, const ErrorModel& error,
                           const DpmmPrior& prior, const ChainConfig& chain, const Grid& grid,
                           const std::function<double(double)>* truth_pdf, double p,
                           std::vector<std::vector<double>>* draws_out) {
  if (W.empty()) throw std::invalid_argument("run_chain: empty sample");
  if (chain.iters <= chain.burnin)
    throw std::invalid_argument("run_chain: iters must exceed burnin");
  if (chain.thin < 1) throw std::invalid_argument("run_chain: thin must be >= 1");
  int kept_planned = (chain.iters - chain.burnin) / chain.thin;
  if (kept_planned < 1) throw std::invalid_argument("run_chain: zero kept draws");
  if (!(chain.band_level > 0.0 && chain.band_level < 1.0))
    throw std::invalid_argument("run_chain: band_level must lie in (0,1)");

  DpmmPrior eff = prior;
  if (eff.sigma0_sq <= 0.0) {
    double mean = 0.0, ss = 0.0;
    for (double w : W) mean += w;
    mean /= static_cast<double>(W.size());
    for (double w : W) ss += (w - mean) * (w - mean);
    double var = W.size() > 1 ? ss / static_cast<double>(W.size() - 1) : 1.0;
    eff.sigma0_sq = 10.0 * std::max(var, 1e-12);
  }
  if (eff.k_trunc <= 0) eff.k_trunc = default_k_trunc(eff.alpha);

  Rng rng = make_rng(chain.seed);
  DpmmState st = prior_draw(eff, rng);
  const std::size_t n = W.size();
  st.latent.assign(W.begin(), W.end());
  st.alloc.resize(n);
  std::vector<double> w0 = st.weights;
  w0.push_back(st.residual);
  for (std::size_t i = 0; i < n; ++i) st.alloc[i] = draw_categorical(rng, w0);

  std::vector<double> xs = grid.points();
  std::vector<std::vector<double>> rows;
  rows.reserve(kept_planned);
  std::vector<double> lp_errors;
  std::vector<double> truth_vals;
  if (truth_pdf) {
    truth_vals.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) truth_vals[i] = (*truth_pdf)(xs[i]);
  }
  GibbsStats stats;
  for (int it = 1; it <= chain.iters; ++it) {
    gibbs_step(st, W, error, eff, rng, /*tune=*/it <= chain.burnin, &stats);
    if (!std::isfinite(st.h) || !std::isfinite(st.residual_atom))
      throw std::runtime_error("run_chain: non-finite state at iteration " + std::to_string(it));
    if (it > chain.burnin && (it - chain.burnin) % chain.thin == 0) {
      std::vector<double> row(grid.n);
      for (std::size_t i = 0; i < grid.n; ++i) row[i] = density_fX(st, xs[i]);
      if (truth_pdf) lp_errors.push_back(lp_distance(grid, row, truth_vals, p));
      rows.push_back(std::move(row));
    }
  }

  PosteriorSummary sum;
  sum.grid = grid;
  sum.kept = static_cast<int>(rows.size());
  sum.effective_prior = eff;
  sum.mean.assign(grid.n, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < grid.n; ++i) sum.mean[i] += r[i];
  for (auto& v : sum.mean) v /= static_cast<double>(rows.size());
  sum.band_lo.resize(grid.n);
  sum.band_hi.resize(grid.n);
  double lo_q = 0.5 * (1.0 - chain.band_level), hi_q = 1.0 - lo_q;
  std::vector<double> col(rows.size());
  for (std::size_t i = 0; i < grid.n; ++i) {
    for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r][i];
    std::sort(col.begin(), col.end());
    auto qat = [&](double q) {
      double pos = q * (col.size() - 1);
      std::size_t j = static_cast<std::size_t>(pos);
      double frac = pos - j;
      return j + 1 < col.size() ? col[j] * (1 - frac) + col[j + 1] * frac : col[j];
    };
    sum.band_lo[i] = qat(lo_q);
    sum.band_hi[i] = qat(hi_q);
  }
  sum.lp_errors = std::move(lp_errors);
  sum.accept_rate_x =
      stats.try_x ? static_cast<double>(stats.accept_x) / stats.try_x : 1.0;
  sum.accept_rate_h =
      stats.try_h ? static_cast<double>(stats.accept_h) / stats.try_h : 1.0;
  sum.mass = trapezoid(grid, sum.mean);
  if (draws_out) *draws_out = std::move(rows);
  return sum;
}

DivergenceResult divergences(const std::function<double(double)>& f0,
                             const std::function<double(double)>& f, double lo, double hi,
                             int n, double floor_eps) {
  if (!(hi > lo)) throw std::invalid_argument("divergences: bad range");
  if (n % 2) ++n;
  DivergenceResult res;
  double dx = (hi - lo) / n;
  double kl = 0.0, kl2 = 0.0, hell = 0.0;
  for (int i = 0; i <= n; ++i) {
    double x = lo + i * dx;
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    double a = f0(x), b = f(x);
    if (a < 0.0 || b < 0.0) throw std::domain_error("divergences: negative density");
    double sq = std::sqrt(a) - std::sqrt(b);
    hell += w * sq * sq;
    if (a > 0.0) {
      double ratio = b / a;
      if (ratio < floor_eps) {
        ratio = floor_eps;
        ++res.floored;
      }
      double l = -std::log(ratio);
      kl += w * a * l;
      kl2 += w * a * l * l;
    }
  }
  double scale = dx / 3.0;
  res.kl = kl * scale;
  res.kl2 = kl2 * scale;
  res.hellinger = std::sqrt(std::max(0.0, hell * scale));
  return res;
}

} // namespace deconv
