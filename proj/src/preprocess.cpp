#include "pepscore/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pepscore {

Spectrum cluster_peaks(const Spectrum& s, double tol) {
  if (!(tol > 0)) {
    throw std::invalid_argument("cluster tolerance must be positive");
  }
  Spectrum out = s;
  out.peaks.clear();
  std::size_t i = 0;
  while (i < s.peaks.size()) {
    Peak rep = s.peaks[i];
    double sum = s.peaks[i].intensity;
    std::size_t j = i + 1;
    while (j < s.peaks.size() && s.peaks[j].mz - s.peaks[j - 1].mz <= tol) {
      if (s.peaks[j].intensity > rep.intensity) rep = s.peaks[j];
      sum += s.peaks[j].intensity;
      ++j;
    }
    out.peaks.push_back(Peak{rep.mz, sum});
    i = j;
  }
  validate_spectrum(out);
  return out;
}

Spectrum normalize(const Spectrum& s) {
  if (s.peaks.empty()) {
    throw std::invalid_argument("spectrum \"" + s.id +
                                "\": cannot normalize an empty spectrum");
  }
  std::vector<double> sorted;
  sorted.reserve(s.peaks.size());
  for (const Peak& p : s.peaks) sorted.push_back(p.intensity);
  std::sort(sorted.begin(), sorted.end());

  // Nearest-rank 90th percentile: ceil(0.9*n) in exact integer arithmetic.
  const std::size_t n = sorted.size();
  const std::size_t rank = (9 * n + 9) / 10;
  const double divisor = sorted[rank - 1];
  if (!(divisor > 0)) {
    throw std::invalid_argument(
        "spectrum \"" + s.id +
        "\": degenerate spectrum, 90th-percentile intensity is zero");
  }

  Spectrum out = s;
  for (Peak& p : out.peaks) p.intensity /= divisor;
  return out;
}

Spectrum stabilize(const Spectrum& s) {
  Spectrum out = s;
  for (Peak& p : out.peaks) p.intensity = std::pow(p.intensity, 0.25);
  return out;
}

Spectrum preprocess(const Spectrum& s, double tol) {
  return stabilize(normalize(cluster_peaks(s, tol)));
}

}  // namespace pepscore
