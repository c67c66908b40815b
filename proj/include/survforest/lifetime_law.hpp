#pragma once

#include <variant>

namespace survforest {

/// Exponential law parameterized by its rate (mean = 1/rate).
struct ExponentialLaw {
  double rate;
};

/// log(T) ~ Normal(mu, sigma^2).
struct LogNormalLaw {
  double mu;
  double sigma;
};

/// Degenerate law that never fires (used for "no censoring", G == 0).
struct NeverLaw {};

/// Closed-form distribution of a failure or censoring time.
class LifetimeLaw {
 public:
  LifetimeLaw(ExponentialLaw law);
  LifetimeLaw(LogNormalLaw law);
  LifetimeLaw(NeverLaw law) : law_(law) {}

  static LifetimeLaw exponential_mean(double mean) { return LifetimeLaw(ExponentialLaw{1.0 / mean}); }

  double cdf(double t) const;
  double survival(double t) const;
  double density(double t) const;
  double mean() const;

  const std::variant<ExponentialLaw, LogNormalLaw, NeverLaw>& law() const { return law_; }

 private:
  std::variant<ExponentialLaw, LogNormalLaw, NeverLaw> law_;
};

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace survforest
