#include "pepscore/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace pepscore {

double similarity_index(const Spectrum& observed, const Spectrum& theoretical,
                        double binwidth) {
  if (!(binwidth > 0)) {
    throw std::invalid_argument("similarity_index: binwidth must be positive");
  }
  std::map<long long, std::pair<double, double>> bins;
  for (const Peak& p : observed.peaks) {
    bins[static_cast<long long>(std::floor(p.mz / binwidth))].first +=
        p.intensity;
  }
  for (const Peak& p : theoretical.peaks) {
    bins[static_cast<long long>(std::floor(p.mz / binwidth))].second +=
        p.intensity;
  }
  // Totals accumulate over the same binned sums as the numerator, so a
  // self-comparison is exactly 1.
  double overlap = 0.0;
  double total_obs = 0.0;
  double total_theo = 0.0;
  for (const auto& [bin, pair] : bins) {
    overlap += std::sqrt(pair.first * pair.second);
    total_obs += pair.first;
    total_theo += pair.second;
  }
  if (!(total_obs > 0) || !(total_theo > 0)) {
    throw std::invalid_argument(
        "similarity_index undefined: a spectrum carries no intensity");
  }
  return overlap / std::sqrt(total_obs * total_theo);
}

double xcorr(const Spectrum& observed, const Spectrum& theoretical,
             double binwidth) {
  if (!(binwidth > 0)) {
    throw std::invalid_argument("xcorr: binwidth must be positive");
  }
  if (observed.empty() || theoretical.empty()) return 0.0;

  constexpr int kMaxLag = 75;
  const double lo = std::min(observed.min_mz(), theoretical.min_mz());
  const double hi = std::max(observed.max_mz(), theoretical.max_mz());
  const int span = static_cast<int>(std::floor((hi - lo) / binwidth)) + 1;
  const int size = span + 2 * kMaxLag;

  std::vector<double> obs(size, 0.0), theo(size, 0.0);
  const auto fill = [&](const Spectrum& s, std::vector<double>& v) {
    for (const Peak& p : s.peaks) {
      int bin = static_cast<int>(std::floor((p.mz - lo) / binwidth));
      bin = std::clamp(bin, 0, span - 1);
      v[bin + kMaxLag] += p.intensity;
    }
  };
  fill(observed, obs);
  fill(theoretical, theo);

  double r0 = 0.0;
  double mean = 0.0;
  for (int lag = -kMaxLag; lag <= kMaxLag; ++lag) {
    double r = 0.0;
    for (int u = 0; u < size; ++u) {
      const int v = u + lag;
      if (v < 0 || v >= size) continue;
      r += obs[u] * theo[v];
    }
    if (lag == 0) r0 = r;
    mean += r;
  }
  mean /= (2 * kMaxLag + 1);
  return r0 - mean;
}

}  // namespace pepscore
