#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pepscore {

struct Peak {
  double mz = 0.0;         // Daltons, > 0
  double intensity = 0.0;  // >= 0
};

enum class SpectrumKind { kObserved, kTheoretical };

// A peak list with identity metadata. Peaks are kept sorted ascending by
// m/z with pairwise-distinct m/z values; go through make_spectrum to get
// both enforced.
struct Spectrum {
  std::string id;
  int charge = 0;
  SpectrumKind kind = SpectrumKind::kObserved;
  std::optional<double> precursor_mz;
  std::vector<Peak> peaks;

  std::size_t size() const { return peaks.size(); }
  bool empty() const { return peaks.empty(); }
  double min_mz() const;
  double max_mz() const;
  double total_intensity() const;
};

// Sorts peaks ascending by m/z and validates; throws std::invalid_argument
// on any violation (nonpositive m/z, negative intensity, duplicate m/z,
// nonpositive charge, non-finite values).
Spectrum make_spectrum(std::string id, int charge, SpectrumKind kind,
                       std::vector<Peak> peaks,
                       std::optional<double> precursor_mz = std::nullopt);

void validate_spectrum(const Spectrum& s);

}  // namespace pepscore
