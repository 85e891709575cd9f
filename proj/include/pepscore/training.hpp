#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pepscore/model.hpp"
#include "pepscore/spectrum.hpp"

namespace pepscore {

// One supervised example: observed and theoretical spectra known to come
// from the same peptide, both already preprocessed, same charge state.
struct TrainingPair {
  Spectrum observed;
  Spectrum theoretical;
};

// Greedy nearest-pair initial configuration: repeatedly match the closest
// unmatched feasible (theoretical, observed) pair; ties broken by lower
// theoretical index, then lower observed index.
EmissionConfiguration init_configuration(const ComponentPartition& partition,
                                         const Spectrum& theoretical,
                                         const Spectrum& observed, double w);

// Maximum-likelihood scale of a mean-zero normal truncated at +-w, given
// residuals inside [-w, w]. Root of the score equation by bisection on
// log(sigma) over [1e-4, w]; degenerate pools pin the estimate to a bound
// and record a warning.
double estimate_sigma(std::span<const double> residuals, double w,
                      std::vector<std::string>* warnings = nullptr);

inline constexpr double kMuBound = 15.0;

// Spectrum-wise intercept maximizing the logistic emission log-likelihood
// with the slope fixed; clamped to [-kMuBound, kMuBound] under separation.
double optimize_mu(std::span<const double> theoretical_intensities,
                   std::span<const char> emitted, double beta);

struct LabeledIntensity {
  double intensity = 0.0;
  bool emitted = false;
};

struct LogisticFit {
  double beta = 0.0;
  std::vector<double> mus;
  int iterations = 0;
};

// Grouped logistic regression: common slope, one intercept per spectrum.
// Block coordinate ascent (damped Newton on beta, exact 1-D Newton per mu)
// iterated to gradient norm < 1e-8.
LogisticFit estimate_logistic(
    const std::vector<std::vector<LabeledIntensity>>& groups,
    double initial_beta, std::vector<double> initial_mus,
    std::vector<std::string>* warnings = nullptr);

// Bin edges shared by f0 and f1, computed once from all observed training
// intensities: the top 1% is the 10th bin, the remaining 99% is split into
// 9 equal-count bins (nearest-rank quantiles), edge[0] = 0. Throws when
// ties make the edges collide.
std::array<double, PiecewiseDensity::kBins + 1> compute_intensity_bin_edges(
    std::vector<double> intensities);

// Bin counts Laplace-smoothed with pseudo-count 1 and normalized.
PiecewiseDensity estimate_piecewise_masses(
    const std::array<double, PiecewiseDensity::kBins + 1>& edges,
    std::span<const double> values);

struct DensityEstimates {
  std::array<double, PiecewiseDensity::kBins + 1> edges{};
  PiecewiseDensity f0;
  PiecewiseDensity f1;
};

DensityEstimates estimate_densities(std::span<const double> corpus_intensities,
                                    std::span<const double> noise_intensities,
                                    std::span<const double> emitted_intensities);

struct FitOptions {
  double window = 2.0;                     // w, Daltons
  std::optional<double> mz_range_length;   // r; default: observed corpus span
  std::uint64_t seed = 1;
  int max_outer_iterations = 100;
  double relative_tolerance = 1e-6;
  int threads = 1;
};

struct TrainingState {
  GlobalParams params;
  std::vector<double> mus;
  std::vector<EmissionConfiguration> configs;
  std::vector<double> spectrum_logliks;
  std::vector<double> loglik_trace;  // one entry per outer iteration
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Alternates shared-parameter re-estimation with per-spectrum coordinate
// ascent over emission configurations and intercepts until the total
// complete-data log-likelihood converges. Every update is acceptance-only,
// so the trace is exactly nondecreasing.
TrainingState fit(const std::vector<TrainingPair>& pairs,
                  const FitOptions& options = {});

}  // namespace pepscore
