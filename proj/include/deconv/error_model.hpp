#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace deconv {

enum class ErrorKind { Gaussian, Cauchy, CustomCF };

// Supersmooth envelope parameters:
//   d0 |t|^beta0 exp(-|t|^beta / varrho) <= |phi(t)| <= d1 |t|^beta1 exp(-|t|^beta / varrho).
struct EnvelopeParams {
  double beta = 2.0;
  double varrho = 2.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double d0 = 1.0;
  double d1 = 1.0;
};

// Known error density psi_sigma with its characteristic function phi_sigma.
// Built-ins use the exact-equality envelope parameterization:
//   Gaussian(sigma): phi(t) = exp(-sigma^2 t^2 / 2), beta = 2, varrho = 2/sigma^2
//   Cauchy(sigma):   phi(t) = exp(-sigma |t|),       beta = 1, varrho = 1/sigma
// Cauchy(0, sigma^2) means median 0 and scale sigma.
class ErrorModel {
public:
  using CfFn = std::function<std::complex<double>(double)>;
  using RealFn = std::function<double(double)>;
  using SampleFn = std::function<std::vector<double>(std::size_t, std::uint64_t)>;

  static ErrorModel gaussian(double sigma);
  static ErrorModel cauchy(double sigma);
  static ErrorModel custom_cf(std::string name, CfFn cf, EnvelopeParams env,
                              RealFn pdf = nullptr, RealFn cdf = nullptr,
                              SampleFn sampler = nullptr);
  // Exact zero-error model (cf == 1); the sigma -> 0 identity case.
  static ErrorModel none();

  std::complex<double> cf(double t) const;
  double pdf(double u) const;
  double cdf(double u) const;
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;

  ErrorKind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  const EnvelopeParams& envelope() const { return env_; }
  void set_envelope(const EnvelopeParams& env) { env_ = env; }
  bool is_identity() const { return identity_; }
  const std::string& id() const { return id_; }

private:
  ErrorModel() = default;
  ErrorKind kind_ = ErrorKind::Gaussian;
  double sigma_ = 1.0;
  EnvelopeParams env_;
  bool identity_ = false;
  std::string id_;
  CfFn custom_cf_;
  RealFn custom_pdf_;
  RealFn custom_cdf_;
  SampleFn custom_sampler_;
};

struct EnvelopePoint {
  double t;
  double abs_cf;
  double lower;
  double upper;
  bool lower_ok;
  bool upper_ok;
};

struct EnvelopeReport {
  std::vector<EnvelopePoint> points;
  std::size_t lower_violations = 0;
  std::size_t upper_violations = 0;
  bool ok() const { return lower_violations == 0 && upper_violations == 0; }
};

// Advisory check of the supersmooth envelope on a strictly positive,
// increasing grid.  Violations are reported, not fatal.
EnvelopeReport check_supersmooth_envelope(const ErrorModel& model,
                                          const std::vector<double>& t_grid);

} // namespace deconv
