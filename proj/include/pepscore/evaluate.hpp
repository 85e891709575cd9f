#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pepscore {

// Ile/Leu and Lys/Gln are (near-)isobaric, so sequences are compared after
// mapping L -> I and Q -> K position-wise.
std::string canonicalize_sequence(std::string_view sequence);
bool is_correct(std::string_view top_candidate, std::string_view truth);

struct IdentificationRecord {
  double confidence = 0.0;
  bool correct = false;
};

struct FdrRow {
  double threshold = 0.0;
  double undetermined_rate = 0.0;        // fraction with confidence < t
  std::optional<double> fdr;             // null when nothing clears t
};

// One row per threshold (ascending): how many identifications are left
// undetermined versus how many of the determined ones are wrong.
std::vector<FdrRow> fdr_vs_undetermined(
    std::span<const IdentificationRecord> records,
    std::span<const double> thresholds);

struct CalibrationRow {
  double lo = 0.0;
  double hi = 0.0;
  long long count = 0;
  std::optional<double> mean_assigned;
  std::optional<double> correct_fraction;
};

// Equal-width probability bins over [0,1] for (assigned posterior, correct)
// pairs pooled over all candidates; empty bins keep their row.
std::vector<CalibrationRow> calibration_bins(
    std::span<const std::pair<double, bool>> pairs, int bins = 10);

// Best minus second-best confidence; +inf marks a single-candidate list.
double confidence_gap(std::span<const double> scores);

// Normalized gap (best - second)/best; null unless best > 0.
std::optional<double> delta_cn(std::span<const double> scores);

}  // namespace pepscore
