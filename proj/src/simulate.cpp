#include "pepscore/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "pepscore/io_util.hpp"

namespace pepscore {

namespace {

double sample_truncated_normal(Rng& rng, double center, double sigma,
                               double w) {
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const double x = center + sigma * rng.normal();
    if (std::abs(x - center) <= w) return x;
  }
  throw std::runtime_error(
      "truncated normal rejection sampling failed (sigma far above w?)");
}

}  // namespace

SimulationTruth sample_observed(const Spectrum& theoretical,
                                const GlobalParams& params, double mu,
                                int noise_count,
                                std::pair<double, double> mz_range, Rng& rng) {
  params.validate();
  if (theoretical.empty()) {
    throw std::invalid_argument("sample_observed: empty theoretical spectrum");
  }
  if (noise_count < 0) {
    throw std::invalid_argument("sample_observed: negative noise count");
  }
  const auto [lo, hi] = mz_range;
  if (!(hi > lo)) {
    throw std::invalid_argument("sample_observed: empty m/z range");
  }
  if (std::abs((hi - lo) - params.r) > 1e-9 * std::max(1.0, params.r)) {
    throw std::invalid_argument(
        "sample_observed: m/z range length " + format_double(hi - lo) +
        " does not match params r = " + format_double(params.r));
  }

  const int n = static_cast<int>(theoretical.size());
  struct Draw {
    double mz;
    double intensity;
    int source;  // theoretical index, or kNoEmission for noise
  };
  std::vector<Draw> draws;
  std::set<double> seen_mz;

  for (int i = 0; i < n; ++i) {
    const Peak& t = theoretical.peaks[i];
    const double p = logistic_emission_prob(t.intensity, mu, params.beta);
    if (!rng.bernoulli(p)) continue;
    double x = sample_truncated_normal(rng, t.mz, params.sigma, params.w);
    while (!seen_mz.insert(x).second) {
      x = sample_truncated_normal(rng, t.mz, params.sigma, params.w);
    }
    draws.push_back(Draw{x, params.f1.sample(rng), i});
  }
  for (int c = 0; c < noise_count; ++c) {
    double x = rng.uniform(lo, hi);
    while (!seen_mz.insert(x).second) x = rng.uniform(lo, hi);
    draws.push_back(Draw{x, params.f0.sample(rng), kNoEmission});
  }

  // Canonical sorted storage subsumes the random relabeling step: peak
  // labels carry no information either way.
  std::sort(draws.begin(), draws.end(),
            [](const Draw& a, const Draw& b) { return a.mz < b.mz; });

  SimulationTruth truth;
  truth.mu = mu;
  truth.noise_count = noise_count;
  truth.true_config.emit_to.assign(n, kNoEmission);
  std::vector<Peak> peaks;
  peaks.reserve(draws.size());
  for (std::size_t j = 0; j < draws.size(); ++j) {
    peaks.push_back(Peak{draws[j].mz, draws[j].intensity});
    if (draws[j].source != kNoEmission) {
      truth.true_config.emit_to[draws[j].source] = static_cast<int>(j);
    }
  }
  truth.observed = make_spectrum(theoretical.id, theoretical.charge,
                                 SpectrumKind::kObserved, std::move(peaks));
  return truth;
}

SimulationTruth sample_observed(const Spectrum& theoretical,
                                const GlobalParams& params, double mu,
                                int noise_count,
                                std::pair<double, double> mz_range,
                                std::uint64_t seed) {
  Rng rng(seed);
  return sample_observed(theoretical, params, mu, noise_count, mz_range, rng);
}

std::vector<Spectrum> make_synthetic_corpus(
    int count, int charge, std::uint64_t seed,
    const SyntheticCorpusOptions& options) {
  if (count < 1) throw std::invalid_argument("corpus count must be >= 1");
  if (options.min_peaks < 1 || options.max_peaks < options.min_peaks) {
    throw std::invalid_argument("bad synthetic peak-count range");
  }
  std::vector<Spectrum> corpus;
  corpus.reserve(count);
  for (int idx = 0; idx < count; ++idx) {
    Rng rng(substream_seed(seed, idx));
    const int n =
        options.min_peaks +
        static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(options.max_peaks - options.min_peaks) +
            1));
    std::set<double> seen;
    std::vector<Peak> peaks;
    for (int i = 0; i < n; ++i) {
      double mz = rng.uniform(options.mz_lo, options.mz_hi);
      while (!seen.insert(mz).second) {
        mz = rng.uniform(options.mz_lo, options.mz_hi);
      }
      const double intensity =
          options.intensity_scale * std::pow(rng.uniform(), 0.7);
      peaks.push_back(Peak{mz, intensity});
    }
    char id[16];
    std::snprintf(id, sizeof(id), "syn-%05d", idx);
    corpus.push_back(
        make_spectrum(id, charge, SpectrumKind::kTheoretical, std::move(peaks)));
  }
  return corpus;
}

GlobalParams default_simulation_params(int charge) {
  GlobalParams p;
  p.charge = charge;
  p.w = 2.0;
  p.r = 1600.0;
  switch (charge) {
    case 1:
      p.sigma = 0.390;
      p.beta = 2.970;
      break;
    case 2:
      p.sigma = 0.160;
      p.beta = 4.740;
      break;
    default:
      throw std::invalid_argument(
          "no built-in simulation defaults for charge " +
          std::to_string(charge) + "; provide a params file");
  }
  for (int b = 0; b <= PiecewiseDensity::kBins; ++b) {
    p.f0.edges[b] = 0.13 * b;
    p.f1.edges[b] = 0.13 * b;
  }
  // Noise intensities lean low, emitted intensities lean high.
  p.f0.masses = {0.22, 0.18, 0.15, 0.12, 0.10, 0.08, 0.06, 0.04, 0.03, 0.02};
  p.f1.masses = {0.02, 0.03, 0.04, 0.06, 0.08, 0.10, 0.12, 0.15, 0.18, 0.22};
  p.validate();
  return p;
}

double default_simulation_mu(int charge) {
  switch (charge) {
    case 1:
      return -1.240;
    case 2:
      return -5.060;
    default:
      throw std::invalid_argument(
          "no built-in simulation intercept for charge " +
          std::to_string(charge));
  }
}

RecoveryReport run_recovery_experiment(const std::vector<Spectrum>& corpus,
                                       const GlobalParams& truth,
                                       double true_mu,
                                       const RecoveryOptions& options) {
  truth.validate();
  if (corpus.size() < 2) {
    throw std::invalid_argument(
        "recovery experiment needs at least 2 theoretical spectra");
  }
  if (options.replicates < 1) {
    throw std::invalid_argument("recovery experiment needs >= 1 replicate");
  }

  RecoveryReport report;
  for (int rep = 0; rep < options.replicates; ++rep) {
    Rng rng(substream_seed(options.seed, 2 * rep));

    std::vector<TrainingPair> pairs;
    std::vector<EmissionConfiguration> truths;
    pairs.reserve(corpus.size());
    for (const Spectrum& T : corpus) {
      const int noise_count = static_cast<int>(
          std::floor(options.noise_fraction * static_cast<double>(T.size())));
      SimulationTruth sim = sample_observed(T, truth, true_mu, noise_count,
                                            options.mz_range, rng);
      truths.push_back(std::move(sim.true_config));
      pairs.push_back(TrainingPair{std::move(sim.observed), T});
    }

    FitOptions fit_options = options.fit;
    fit_options.window = truth.w;
    fit_options.mz_range_length = truth.r;
    fit_options.seed = substream_seed(options.seed, 2 * rep + 1);
    const TrainingState state = fit(pairs, fit_options);

    RecoveryReplicate row;
    for (double mu : state.mus) row.mu_mean += mu;
    row.mu_mean /= static_cast<double>(state.mus.size());
    row.beta = state.params.beta;
    row.sigma = state.params.sigma;
    row.converged = state.converged;
    row.iterations = state.iterations;
    row.trace_nondecreasing = true;
    for (std::size_t t = 1; t < state.loglik_trace.size(); ++t) {
      if (state.loglik_trace[t] < state.loglik_trace[t - 1]) {
        row.trace_nondecreasing = false;
      }
    }

    std::int64_t theo_total = 0, theo_wrong = 0;
    std::int64_t obs_total = 0, obs_wrong = 0;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
      const auto& est = state.configs[s].emit_to;
      const auto& tru = truths[s].emit_to;
      theo_total += static_cast<std::int64_t>(est.size());
      for (std::size_t i = 0; i < est.size(); ++i) {
        theo_wrong += (est[i] != kNoEmission) != (tru[i] != kNoEmission);
      }
      const int m = static_cast<int>(pairs[s].observed.size());
      std::vector<char> est_emitted(m, 0), true_emitted(m, 0);
      for (int j : est) {
        if (j != kNoEmission) est_emitted[j] = 1;
      }
      for (int j : tru) {
        if (j != kNoEmission) true_emitted[j] = 1;
      }
      obs_total += m;
      for (int j = 0; j < m; ++j) {
        obs_wrong += est_emitted[j] != true_emitted[j];
      }
    }
    row.ce_theoretical =
        static_cast<double>(theo_wrong) / static_cast<double>(theo_total);
    row.ce_observed =
        static_cast<double>(obs_wrong) / static_cast<double>(obs_total);
    report.replicates.push_back(row);
  }

  const double n = static_cast<double>(report.replicates.size());
  const auto accumulate = [&](auto field) {
    double mean = 0.0;
    for (const auto& row : report.replicates) mean += row.*field;
    mean /= n;
    double var = 0.0;
    for (const auto& row : report.replicates) {
      const double d = row.*field - mean;
      var += d * d;
    }
    const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };
  std::tie(report.mean.mu_mean, report.sd.mu_mean) =
      accumulate(&RecoveryReplicate::mu_mean);
  std::tie(report.mean.beta, report.sd.beta) =
      accumulate(&RecoveryReplicate::beta);
  std::tie(report.mean.sigma, report.sd.sigma) =
      accumulate(&RecoveryReplicate::sigma);
  std::tie(report.mean.ce_theoretical, report.sd.ce_theoretical) =
      accumulate(&RecoveryReplicate::ce_theoretical);
  std::tie(report.mean.ce_observed, report.sd.ce_observed) =
      accumulate(&RecoveryReplicate::ce_observed);
  return report;
}

std::string serialize_recovery_report(const RecoveryReport& report) {
  std::ostringstream out;
  out << "replicate\tmu_mean\tbeta\tsigma\tce_theoretical\tce_observed\n";
  const auto row = [&](const std::string& label, const RecoveryReplicate& r) {
    out << label << "\t" << format_double(r.mu_mean) << "\t"
        << format_double(r.beta) << "\t" << format_double(r.sigma) << "\t"
        << format_double(r.ce_theoretical) << "\t"
        << format_double(r.ce_observed) << "\n";
  };
  for (std::size_t i = 0; i < report.replicates.size(); ++i) {
    row(std::to_string(i), report.replicates[i]);
  }
  row("mean", report.mean);
  row("sd", report.sd);
  return out.str();
}

}  // namespace pepscore
