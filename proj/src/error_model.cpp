#include "deconv/error_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "deconv/quadrature.hpp"
#include "deconv/rng.hpp"

namespace deconv {

ErrorModel ErrorModel::gaussian(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian error: sigma must be positive");
  ErrorModel m;
  m.kind_ = ErrorKind::Gaussian;
  m.sigma_ = sigma;
  m.env_ = EnvelopeParams{2.0, 2.0 / (sigma * sigma), 0.0, 0.0, 1.0, 1.0};
  m.id_ = "gaussian(sigma=" + std::to_string(sigma) + ")";
  return m;
}

ErrorModel ErrorModel::cauchy(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("cauchy error: sigma must be positive");
  ErrorModel m;
  m.kind_ = ErrorKind::Cauchy;
  m.sigma_ = sigma;
  m.env_ = EnvelopeParams{1.0, 1.0 / sigma, 0.0, 0.0, 1.0, 1.0};
  m.id_ = "cauchy(sigma=" + std::to_string(sigma) + ")";
  return m;
}

ErrorModel ErrorModel::custom_cf(std::string name, CfFn cf, EnvelopeParams env,
                                 RealFn pdf, RealFn cdf, SampleFn sampler) {
  if (!cf) throw std::invalid_argument("custom error: cf callable required");
  ErrorModel m;
  m.kind_ = ErrorKind::CustomCF;
  m.sigma_ = 1.0;
  m.env_ = env;
  m.id_ = "custom(" + name + ")";
  m.custom_cf_ = std::move(cf);
  m.custom_pdf_ = std::move(pdf);
  m.custom_cdf_ = std::move(cdf);
  m.custom_sampler_ = std::move(sampler);
  return m;
}

ErrorModel ErrorModel::none() {
  ErrorModel m = custom_cf(
      "none", [](double) { return std::complex<double>(1.0, 0.0); },
      EnvelopeParams{1.0, std::numeric_limits<double>::infinity(), 0.0, 0.0, 1.0, 1.0},
      nullptr, nullptr,
      [](std::size_t n, std::uint64_t) { return std::vector<double>(n, 0.0); });
  m.identity_ = true;
  m.id_ = "none";
  return m;
}

std::complex<double> ErrorModel::cf(double t) const {
  if (!std::isfinite(t)) throw std::invalid_argument("cf_error: non-finite t");
  switch (kind_) {
    case ErrorKind::Gaussian:
      return {std::exp(-0.5 * sigma_ * sigma_ * t * t), 0.0};
    case ErrorKind::Cauchy:
      return {std::exp(-sigma_ * std::abs(t)), 0.0};
    case ErrorKind::CustomCF:
      return custom_cf_(t);
  }
  return {1.0, 0.0};
}

double ErrorModel::pdf(double u) const {
  if (!std::isfinite(u)) throw std::invalid_argument("pdf_error: non-finite u");
  switch (kind_) {
    case ErrorKind::Gaussian: {
      double z = u / sigma_;
      return std::exp(-0.5 * z * z) / (sigma_ * std::sqrt(2.0 * M_PI));
    }
    case ErrorKind::Cauchy:
      return sigma_ / (M_PI * (u * u + sigma_ * sigma_));
    case ErrorKind::CustomCF: {
      if (custom_pdf_) return custom_pdf_(u);
      if (identity_)
        throw std::domain_error("pdf_error: degenerate (point-mass) error has no density");
      // Numeric Fourier inversion; the CF is truncated where |phi| is negligible.
      double tmax = 1.0;
      while (std::abs(custom_cf_(tmax)) > 1e-12 && tmax < 1e6) tmax *= 2.0;
      auto integrand = [&](double t) {
        std::complex<double> v = custom_cf_(t) * std::exp(std::complex<double>(0.0, -t * u));
        return v.real();
      };
      return trapezoid_rule(integrand, -tmax, tmax, 1 << 15) / (2.0 * M_PI);
    }
  }
  return 0.0;
}

double ErrorModel::cdf(double u) const {
  switch (kind_) {
    case ErrorKind::Gaussian:
      return 0.5 * std::erfc(-u / (sigma_ * std::sqrt(2.0)));
    case ErrorKind::Cauchy:
      return 0.5 + std::atan(u / sigma_) / M_PI;
    case ErrorKind::CustomCF:
      if (custom_cdf_) return custom_cdf_(u);
      throw std::domain_error("cdf_error: no cdf available for this custom model");
  }
  return 0.0;
}

std::vector<double> ErrorModel::sample(std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw std::invalid_argument("sample_error: n must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  switch (kind_) {
    case ErrorKind::Gaussian:
      for (auto& v : out) v = draw_normal(rng, 0.0, sigma_);
      return out;
    case ErrorKind::Cauchy:
      for (auto& v : out) v = draw_cauchy(rng, 0.0, sigma_);
      return out;
    case ErrorKind::CustomCF:
      if (custom_sampler_) return custom_sampler_(n, seed);
      throw std::domain_error("sample_error: no sampler available for this custom model");
  }
  return out;
}

EnvelopeReport check_supersmooth_envelope(const ErrorModel& model,
                                          const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw std::invalid_argument("envelope check: empty grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0)) throw std::invalid_argument("envelope check: grid must be positive");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("envelope check: grid must be increasing");
  }
  const EnvelopeParams& e = model.envelope();
  EnvelopeReport rep;
  rep.points.reserve(t_grid.size());
  const double tol = 1e-12;
  for (double t : t_grid) {
    double decay = std::exp(-std::pow(t, e.beta) / e.varrho);
    EnvelopePoint p;
    p.t = t;
    p.abs_cf = std::abs(model.cf(t));
    p.lower = e.d0 * std::pow(t, e.beta0) * decay;
    p.upper = e.d1 * std::pow(t, e.beta1) * decay;
    p.lower_ok = p.abs_cf >= p.lower * (1.0 - tol) - tol;
    p.upper_ok = p.abs_cf <= p.upper * (1.0 + tol) + tol;
    if (!p.lower_ok) ++rep.lower_violations;
    if (!p.upper_ok) ++rep.upper_violations;
    rep.points.push_back(p);
  }
  return rep;
}

} // namespace deconv
