#include "pepscore/densities.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace pepscore {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
constexpr double kSqrt2 = 1.41421356237309504880;
}  // namespace

double logistic_emission_prob(double y, double mu, double beta) {
  const double p = std::exp(log_sigmoid(mu + beta * y));
  return std::clamp(p, std::numeric_limits<double>::min(),
                    1.0 - std::numeric_limits<double>::epsilon() / 2);
}

double truncated_normal_log_norm(double sigma, double w) {
  return std::log(std::erf(w / (sigma * kSqrt2)));
}

double truncated_normal_logpdf(double x, double center, double sigma,
                               double w) {
  if (!(sigma > 0) || !(w > 0)) {
    throw std::invalid_argument("truncated normal requires sigma>0, w>0");
  }
  const double d = x - center;
  if (std::abs(d) > w) return -kInf;
  const double z = d / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi -
         truncated_normal_log_norm(sigma, w);
}

void PiecewiseDensity::validate() const {
  double total = 0.0;
  for (int b = 0; b < kBins; ++b) {
    if (!(masses[b] >= 0) || !std::isfinite(masses[b])) {
      throw std::invalid_argument("density mass must be nonnegative");
    }
    total += masses[b];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("density masses must sum to 1");
  }
  for (int b = 0; b <= kBins; ++b) {
    if (!std::isfinite(edges[b])) {
      throw std::invalid_argument("density edges must be finite");
    }
    if (b > 0 && !(edges[b - 1] < edges[b])) {
      throw std::invalid_argument("density edges must be strictly increasing");
    }
  }
}

int PiecewiseDensity::bin_index(double y) const {
  if (y <= edges.front()) return 0;
  if (y >= edges.back()) return kBins - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), y);
  return static_cast<int>(it - edges.begin()) - 1;
}

double PiecewiseDensity::logpdf(double y) const {
  const int b = bin_index(y);
  if (!(masses[b] > 0)) return -kInf;
  return std::log(masses[b]) - std::log(edges[b + 1] - edges[b]);
}

double PiecewiseDensity::sample(Rng& rng) const {
  const double u = rng.uniform();
  double cum = 0.0;
  int bin = kBins - 1;
  for (int b = 0; b < kBins; ++b) {
    cum += masses[b];
    if (u < cum) {
      bin = b;
      break;
    }
  }
  return edges[bin] + rng.uniform() * (edges[bin + 1] - edges[bin]);
}

PiecewiseDensity uniform_piecewise_density(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("need lo < hi");
  PiecewiseDensity d;
  const double width = (hi - lo) / PiecewiseDensity::kBins;
  for (int b = 0; b <= PiecewiseDensity::kBins; ++b) {
    d.edges[b] = lo + b * width;
  }
  d.edges.back() = hi;
  d.masses.fill(1.0 / PiecewiseDensity::kBins);
  d.validate();
  return d;
}

}  // namespace pepscore
