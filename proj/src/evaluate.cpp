#include "pepscore/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pepscore {

std::string canonicalize_sequence(std::string_view sequence) {
  std::string out(sequence);
  for (char& c : out) {
    if (c == 'L') c = 'I';
    if (c == 'Q') c = 'K';
  }
  return out;
}

bool is_correct(std::string_view top_candidate, std::string_view truth) {
  if (top_candidate.size() != truth.size()) return false;
  return canonicalize_sequence(top_candidate) == canonicalize_sequence(truth);
}

std::vector<FdrRow> fdr_vs_undetermined(
    std::span<const IdentificationRecord> records,
    std::span<const double> thresholds) {
  if (records.empty()) {
    throw std::invalid_argument("fdr_vs_undetermined: no records");
  }
  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<FdrRow> rows;
  rows.reserve(sorted.size());
  const double total = static_cast<double>(records.size());
  for (double t : sorted) {
    long long undetermined = 0;
    long long determined = 0;
    long long incorrect = 0;
    for (const IdentificationRecord& rec : records) {
      if (rec.confidence < t) {
        ++undetermined;
      } else {
        ++determined;
        incorrect += !rec.correct;
      }
    }
    FdrRow row;
    row.threshold = t;
    row.undetermined_rate = static_cast<double>(undetermined) / total;
    if (determined > 0) {
      row.fdr = static_cast<double>(incorrect) /
                static_cast<double>(determined);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<CalibrationRow> calibration_bins(
    std::span<const std::pair<double, bool>> pairs, int bins) {
  if (pairs.empty()) {
    throw std::invalid_argument("calibration_bins: no pairs");
  }
  if (bins < 1) throw std::invalid_argument("calibration_bins: bins >= 1");

  std::vector<long long> count(bins, 0), correct(bins, 0);
  std::vector<double> assigned_sum(bins, 0.0);
  for (const auto& [p, ok] : pairs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(
          "calibration_bins: probabilities must lie in [0, 1]");
    }
    int b = static_cast<int>(p * bins);
    if (b == bins) b = bins - 1;  // p == 1.0 joins the final bin
    ++count[b];
    correct[b] += ok;
    assigned_sum[b] += p;
  }

  std::vector<CalibrationRow> rows;
  rows.reserve(bins);
  for (int b = 0; b < bins; ++b) {
    CalibrationRow row;
    row.lo = static_cast<double>(b) / bins;
    row.hi = static_cast<double>(b + 1) / bins;
    row.count = count[b];
    if (count[b] > 0) {
      row.mean_assigned = assigned_sum[b] / static_cast<double>(count[b]);
      row.correct_fraction =
          static_cast<double>(correct[b]) / static_cast<double>(count[b]);
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::pair<double, double> top_two(std::span<const double> scores) {
  double best = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (s > best) {
      second = best;
      best = s;
    } else if (s > second) {
      second = s;
    }
  }
  return {best, second};
}

}  // namespace

double confidence_gap(std::span<const double> scores) {
  if (scores.empty()) {
    throw std::invalid_argument("confidence_gap: no scores");
  }
  if (scores.size() == 1) return std::numeric_limits<double>::infinity();
  const auto [best, second] = top_two(scores);
  return best - second;
}

std::optional<double> delta_cn(std::span<const double> scores) {
  if (scores.empty()) {
    throw std::invalid_argument("delta_cn: no scores");
  }
  const auto [best, second] = top_two(scores);
  if (!(best > 0)) return std::nullopt;
  if (scores.size() == 1) return std::numeric_limits<double>::infinity();
  return (best - second) / best;
}

}  // namespace pepscore
