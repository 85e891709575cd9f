#include "pepscore/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pepscore/io_util.hpp"

namespace pepscore {

double Spectrum::min_mz() const {
  if (peaks.empty()) throw std::logic_error("min_mz of empty spectrum");
  return peaks.front().mz;
}

double Spectrum::max_mz() const {
  if (peaks.empty()) throw std::logic_error("max_mz of empty spectrum");
  return peaks.back().mz;
}

double Spectrum::total_intensity() const {
  double total = 0.0;
  for (const Peak& p : peaks) total += p.intensity;
  return total;
}

Spectrum make_spectrum(std::string id, int charge, SpectrumKind kind,
                       std::vector<Peak> peaks,
                       std::optional<double> precursor_mz) {
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.mz < b.mz; });
  Spectrum s;
  s.id = std::move(id);
  s.charge = charge;
  s.kind = kind;
  s.precursor_mz = precursor_mz;
  s.peaks = std::move(peaks);
  validate_spectrum(s);
  return s;
}

void validate_spectrum(const Spectrum& s) {
  if (s.charge < 1) {
    throw std::invalid_argument("spectrum \"" + s.id +
                                "\": charge must be a positive integer");
  }
  if (s.precursor_mz && !(*s.precursor_mz > 0 &&
                          std::isfinite(*s.precursor_mz))) {
    throw std::invalid_argument("spectrum \"" + s.id +
                                "\": precursor m/z must be positive");
  }
  for (std::size_t i = 0; i < s.peaks.size(); ++i) {
    const Peak& p = s.peaks[i];
    if (!(p.mz > 0) || !std::isfinite(p.mz)) {
      throw std::invalid_argument("spectrum \"" + s.id +
                                  "\": m/z must be positive and finite, got " +
                                  format_double(p.mz));
    }
    if (!(p.intensity >= 0) || !std::isfinite(p.intensity)) {
      throw std::invalid_argument(
          "spectrum \"" + s.id + "\": intensity must be nonnegative, got " +
          format_double(p.intensity));
    }
    if (i > 0 && !(s.peaks[i - 1].mz < p.mz)) {
      throw std::invalid_argument("spectrum \"" + s.id +
                                  "\": duplicate m/z " + format_double(p.mz));
    }
  }
}

}  // namespace pepscore
