#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pepscore/model.hpp"
#include "pepscore/rng.hpp"
#include "pepscore/spectrum.hpp"
#include "pepscore/training.hpp"

namespace pepscore {

struct SimulationTruth {
  Spectrum observed;
  EmissionConfiguration true_config;  // theoretical -> observed peak index
  double mu = 0.0;
  int noise_count = 0;
};

// One draw from the generative model: each theoretical peak emits with
// probability g(y; mu, beta); emitted locations are truncated-normal around
// the theoretical location (rejection inside +-w), emitted intensities come
// from f1; `noise_count` noise peaks get uniform locations over mz_range
// and f0 intensities. Exact m/z collisions are re-drawn.
SimulationTruth sample_observed(const Spectrum& theoretical,
                                const GlobalParams& params, double mu,
                                int noise_count,
                                std::pair<double, double> mz_range, Rng& rng);

SimulationTruth sample_observed(const Spectrum& theoretical,
                                const GlobalParams& params, double mu,
                                int noise_count,
                                std::pair<double, double> mz_range,
                                std::uint64_t seed);

struct SyntheticCorpusOptions {
  int min_peaks = 20;
  int max_peaks = 60;
  double mz_lo = 200.0;
  double mz_hi = 1800.0;
  double intensity_scale = 1.3;  // intensities ~ scale * U^0.7 (right-skewed)
};

// Synthetic theoretical spectra for simulation studies, ids "syn-%05d".
std::vector<Spectrum> make_synthetic_corpus(
    int count, int charge, std::uint64_t seed,
    const SyntheticCorpusOptions& options = {});

// Built-in simulation defaults per charge state (sigma/beta/intercept tuned
// to typical ion-trap behavior at that charge; w = 2 Da over a
// [200, 1800] Da range). Only charges 1 and 2 have defaults.
GlobalParams default_simulation_params(int charge);
double default_simulation_mu(int charge);

struct RecoveryOptions {
  int replicates = 20;
  std::uint64_t seed = 1;
  double noise_fraction = 0.9;  // noise peaks per spectrum: floor(0.9 n)
  std::pair<double, double> mz_range{200.0, 1800.0};
  FitOptions fit;
};

struct RecoveryReplicate {
  double mu_mean = 0.0;  // mean of fitted per-spectrum intercepts
  double beta = 0.0;
  double sigma = 0.0;
  double ce_theoretical = 0.0;  // misclassified emission labels, T side
  double ce_observed = 0.0;     // misclassified emission labels, O side
  // Fit diagnostics; carried for checks, not part of the report table.
  bool converged = false;
  int iterations = 0;
  bool trace_nondecreasing = false;
};

struct RecoveryReport {
  std::vector<RecoveryReplicate> replicates;
  RecoveryReplicate mean;
  RecoveryReplicate sd;  // sample sd; zero when replicates < 2
};

// Simulates one observed spectrum per theoretical spectrum, refits the
// model, and measures parameter recovery and emission-label accuracy,
// repeated over independent replicates.
RecoveryReport run_recovery_experiment(const std::vector<Spectrum>& corpus,
                                       const GlobalParams& truth,
                                       double true_mu,
                                       const RecoveryOptions& options);

std::string serialize_recovery_report(const RecoveryReport& report);

}  // namespace pepscore
