#include "survforest/lifetime_law.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "survforest/error.hpp"

namespace survforest {

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
}  // namespace

LifetimeLaw::LifetimeLaw(ExponentialLaw law) : law_(law) {
  if (!(law.rate > 0.0) || !std::isfinite(law.rate)) throw InvalidArgument("exponential law needs a positive finite rate");
}

LifetimeLaw::LifetimeLaw(LogNormalLaw law) : law_(law) {
  if (!(law.sigma > 0.0) || !std::isfinite(law.mu)) throw InvalidArgument("log-normal law needs sigma > 0 and finite mu");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double LifetimeLaw::survival(double t) const {
  if (t <= 0.0) return 1.0;
  return std::visit(Overloaded{
                        [t](const ExponentialLaw& e) { return std::exp(-e.rate * t); },
                        [t](const LogNormalLaw& l) { return 0.5 * std::erfc((std::log(t) - l.mu) / (l.sigma * std::numbers::sqrt2)); },
                        [](const NeverLaw&) { return 1.0; },
                    },
                    law_);
}

double LifetimeLaw::cdf(double t) const { return 1.0 - survival(t); }

double LifetimeLaw::density(double t) const {
  if (t < 0.0) return 0.0;
  return std::visit(Overloaded{
                        [t](const ExponentialLaw& e) { return e.rate * std::exp(-e.rate * t); },
                        [t](const LogNormalLaw& l) {
                          if (t <= 0.0) return 0.0;
                          const double z = (std::log(t) - l.mu) / l.sigma;
                          return std::exp(-0.5 * z * z) / (t * l.sigma * std::sqrt(2.0 * std::numbers::pi));
                        },
                        [](const NeverLaw&) { return 0.0; },
                    },
                    law_);
}

double LifetimeLaw::mean() const {
  return std::visit(Overloaded{
                        [](const ExponentialLaw& e) { return 1.0 / e.rate; },
                        [](const LogNormalLaw& l) { return std::exp(l.mu + 0.5 * l.sigma * l.sigma); },
                        [](const NeverLaw&) { return std::numeric_limits<double>::infinity(); },
                    },
                    law_);
}

}  // namespace survforest
