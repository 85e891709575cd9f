#pragma once

#include <array>
#include <cmath>

#include "pepscore/rng.hpp"

namespace pepscore {

// log(1/(1+exp(-t))), overflow-safe for any t.
inline double log_sigmoid(double t) {
  return t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

// Emission probability for a theoretical peak of transformed intensity y:
// logit p = mu + beta*y. Clamped into the open interval (0,1) so extreme
// logits cannot round to an exact 0 or 1.
double logistic_emission_prob(double y, double mu, double beta);

// log of the normalizing constant of a normal truncated at +-w around its
// mean: P(|X - mean| <= w) = erf(w / (sigma*sqrt(2))).
double truncated_normal_log_norm(double sigma, double w);

// Log density of a normal with the given center and scale, truncated at
// distance w from the center; -inf outside the support.
double truncated_normal_logpdf(double x, double center, double sigma,
                               double w);

// Piecewise-constant probability density over 10 bins. Lookups are
// left-closed/right-open with the final bin right-closed; values outside
// the edge range are clamped into the boundary bins.
struct PiecewiseDensity {
  static constexpr int kBins = 10;

  std::array<double, kBins + 1> edges{};
  std::array<double, kBins> masses{};

  void validate() const;  // throws std::invalid_argument
  int bin_index(double y) const;
  double logpdf(double y) const;  // -inf on zero-mass bins

  // One draw: bin by CDF inversion, then uniform within the bin.
  double sample(Rng& rng) const;
};

// 10 equal bins with equal masses on [lo, hi]; handy default/test density.
PiecewiseDensity uniform_piecewise_density(double lo, double hi);

}  // namespace pepscore
