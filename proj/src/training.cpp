#include "pepscore/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <set>
#include <thread>

#include "pepscore/io_util.hpp"
#include "pepscore/parallel.hpp"
#include "pepscore/rng.hpp"

namespace pepscore {

namespace {

constexpr double kGradientTol = 1e-8;
constexpr double kSigmaFloor = 1e-4;

}  // namespace

EmissionConfiguration init_configuration(const ComponentPartition& partition,
                                         const Spectrum& theoretical,
                                         const Spectrum& observed, double w) {
  struct Edge {
    double distance;
    int theo;
    int obs;
  };
  std::vector<Edge> edges;
  for (const Component& c : partition.components) {
    for (int i : c.theoretical) {
      for (int j : c.observed) {
        const double d =
            std::abs(theoretical.peaks[i].mz - observed.peaks[j].mz);
        if (d <= w) edges.push_back(Edge{d, i, j});
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.theo != b.theo) return a.theo < b.theo;
    return a.obs < b.obs;
  });

  EmissionConfiguration e;
  e.emit_to.assign(theoretical.size(), kNoEmission);
  std::vector<char> obs_used(observed.size(), 0);
  for (const Edge& edge : edges) {
    if (e.emit_to[edge.theo] != kNoEmission || obs_used[edge.obs]) continue;
    e.emit_to[edge.theo] = edge.obs;
    obs_used[edge.obs] = 1;
  }
  return e;
}

namespace {

// sigma * d/dsigma of the truncated-normal log-likelihood at scale sigma:
//   sum(x^2)/sigma^2 - n + n * sqrt(2/pi) * (w/sigma) * exp(-w^2/(2 sigma^2))
//                       / erf(w/(sigma sqrt(2)))
double sigma_score(double sigma, double sum_sq, double n, double w) {
  constexpr double kSqrt2OverPi = 0.79788456080286535588;
  constexpr double kSqrt2 = 1.41421356237309504880;
  const double a = w / sigma;
  const double tail =
      n * kSqrt2OverPi * a * std::exp(-0.5 * a * a) / std::erf(a / kSqrt2);
  return sum_sq / (sigma * sigma) - n + tail;
}

}  // namespace

double estimate_sigma(std::span<const double> residuals, double w,
                      std::vector<std::string>* warnings) {
  if (residuals.size() < 2) {
    throw std::invalid_argument("estimate_sigma needs at least 2 residuals");
  }
  double sum_sq = 0.0;
  for (double x : residuals) {
    if (std::abs(x) > w) {
      throw std::invalid_argument("residual outside the +-w window");
    }
    sum_sq += x * x;
  }
  const double n = static_cast<double>(residuals.size());

  if (sigma_score(kSigmaFloor, sum_sq, n, w) <= 0) {
    if (warnings) {
      warnings->push_back(
          "estimate_sigma: degenerate residuals, sigma floored at 1e-4");
    }
    return kSigmaFloor;
  }
  if (sigma_score(w, sum_sq, n, w) >= 0) {
    if (warnings) {
      warnings->push_back(
          "estimate_sigma: sigma at the upper search bound w = " +
          format_double(w));
    }
    return w;
  }

  double lo = std::log(kSigmaFloor);
  double hi = std::log(w);
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (sigma_score(std::exp(mid), sum_sq, n, w) > 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

double optimize_mu(std::span<const double> theoretical_intensities,
                   std::span<const char> emitted, double beta) {
  const std::size_t n = theoretical_intensities.size();
  if (n == 0 || emitted.size() != n) {
    throw std::invalid_argument("optimize_mu: bad label vector");
  }
  double k = 0;
  for (char z : emitted) k += z ? 1.0 : 0.0;

  const auto grad = [&](double mu) {
    double p_sum = 0.0;
    for (double y : theoretical_intensities) {
      p_sum += logistic_emission_prob(y, mu, beta);
    }
    return k - p_sum;
  };

  double lo = -kMuBound;
  double hi = kMuBound;
  if (grad(hi) >= 0) return hi;  // separation: every peak emits
  if (grad(lo) <= 0) return lo;

  // Newton safeguarded by the bracket; the gradient is strictly decreasing.
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double g = grad(mu);
    if (std::abs(g) < kGradientTol) break;
    if (g > 0) {
      lo = mu;
    } else {
      hi = mu;
    }
    double hess = 0.0;
    for (double y : theoretical_intensities) {
      const double p = logistic_emission_prob(y, mu, beta);
      hess += p * (1.0 - p);
    }
    double next = hess > 0 ? mu + g / hess : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
    if (hi - lo < 1e-13) break;
  }
  return mu;
}

namespace {

double logistic_objective(const std::vector<std::vector<LabeledIntensity>>& groups,
                          double beta, const std::vector<double>& mus) {
  double total = 0.0;
  for (std::size_t s = 0; s < groups.size(); ++s) {
    for (const LabeledIntensity& li : groups[s]) {
      const double t = mus[s] + beta * li.intensity;
      total += li.emitted ? log_sigmoid(t) : log_sigmoid(-t);
    }
  }
  return total;
}

}  // namespace

LogisticFit estimate_logistic(
    const std::vector<std::vector<LabeledIntensity>>& groups,
    double initial_beta, std::vector<double> initial_mus,
    std::vector<std::string>* warnings) {
  const std::size_t n_groups = groups.size();
  if (n_groups == 0 || initial_mus.size() != n_groups) {
    throw std::invalid_argument("estimate_logistic: bad group inputs");
  }
  for (const auto& g : groups) {
    if (g.empty()) {
      throw std::invalid_argument(
          "estimate_logistic: every spectrum must contribute peaks");
    }
  }

  LogisticFit fit;
  fit.beta = initial_beta;
  fit.mus = std::move(initial_mus);

  const auto beta_gradient = [&]() {
    double g = 0.0;
    for (std::size_t s = 0; s < n_groups; ++s) {
      for (const LabeledIntensity& li : groups[s]) {
        const double p =
            logistic_emission_prob(li.intensity, fit.mus[s], fit.beta);
        g += ((li.emitted ? 1.0 : 0.0) - p) * li.intensity;
      }
    }
    return g;
  };

  std::vector<double> ys;
  std::vector<char> zs;
  const auto mu_pass = [&]() {
    for (std::size_t s = 0; s < n_groups; ++s) {
      ys.clear();
      zs.clear();
      for (const LabeledIntensity& li : groups[s]) {
        ys.push_back(li.intensity);
        zs.push_back(li.emitted ? 1 : 0);
      }
      fit.mus[s] = optimize_mu(ys, zs, fit.beta);
    }
  };

  mu_pass();
  for (int it = 1; it <= 200; ++it) {
    fit.iterations = it;
    const double g = beta_gradient();
    if (std::abs(g) < kGradientTol) break;

    double hess = 0.0;
    for (std::size_t s = 0; s < n_groups; ++s) {
      for (const LabeledIntensity& li : groups[s]) {
        const double p =
            logistic_emission_prob(li.intensity, fit.mus[s], fit.beta);
        hess += p * (1.0 - p) * li.intensity * li.intensity;
      }
    }
    if (!(hess > 0)) break;  // no curvature left in beta

    // Damped Newton: halve until the objective does not decrease. Steps at
    // rounding scale are taken as-is; their objective change is below
    // double precision while the gradient can still be far from tol.
    double step = g / hess;
    const double before = logistic_objective(groups, fit.beta, fit.mus);
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving) {
      if (std::abs(step) <= 1e-9 * (1.0 + std::abs(fit.beta)) ||
          logistic_objective(groups, fit.beta + step, fit.mus) >= before) {
        fit.beta += step;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    mu_pass();
  }

  if (warnings) {
    for (std::size_t s = 0; s < n_groups; ++s) {
      if (fit.mus[s] == kMuBound || fit.mus[s] == -kMuBound) {
        warnings->push_back("logistic separation in spectrum " +
                            std::to_string(s) + ": mu clamped at " +
                            format_double(fit.mus[s]));
      }
    }
  }
  return fit;
}

std::array<double, PiecewiseDensity::kBins + 1> compute_intensity_bin_edges(
    std::vector<double> intensities) {
  const std::size_t n = intensities.size();
  if (n < 10) {
    throw std::invalid_argument(
        "bin edges need at least 10 training intensities");
  }
  std::sort(intensities.begin(), intensities.end());

  std::size_t distinct = 1;
  for (std::size_t i = 1; i < n; ++i) {
    distinct += intensities[i] != intensities[i - 1];
  }
  if (distinct < 10) {
    throw std::invalid_argument(
        "duplicate bin edges: fewer than 10 distinct intensity values in the "
        "training corpus");
  }

  std::array<double, PiecewiseDensity::kBins + 1> edges{};
  edges[0] = 0.0;
  edges[10] = intensities.back();
  const std::size_t rank99 = (99 * n + 99) / 100;  // nearest-rank 99th pct
  edges[9] = intensities[rank99 - 1];

  // The lower 99% is split into 9 equal-count bins.
  const std::size_t n_low = rank99;
  for (std::size_t t = 1; t <= 8; ++t) {
    const std::size_t rank = (t * n_low + 8) / 9;
    edges[t] = intensities[rank - 1];
  }

  for (int b = 1; b <= PiecewiseDensity::kBins; ++b) {
    if (!(edges[b - 1] < edges[b])) {
      throw std::invalid_argument(
          "duplicate bin edges: tied intensities collapse bins " +
          std::to_string(b - 1) + " and " + std::to_string(b));
    }
  }
  return edges;
}

PiecewiseDensity estimate_piecewise_masses(
    const std::array<double, PiecewiseDensity::kBins + 1>& edges,
    std::span<const double> values) {
  PiecewiseDensity d;
  d.edges = edges;
  std::array<std::int64_t, PiecewiseDensity::kBins> counts{};
  for (double v : values) ++counts[d.bin_index(v)];
  const double denom =
      static_cast<double>(values.size()) + PiecewiseDensity::kBins;
  for (int b = 0; b < PiecewiseDensity::kBins; ++b) {
    d.masses[b] = (static_cast<double>(counts[b]) + 1.0) / denom;
  }
  d.validate();
  return d;
}

DensityEstimates estimate_densities(
    std::span<const double> corpus_intensities,
    std::span<const double> noise_intensities,
    std::span<const double> emitted_intensities) {
  DensityEstimates out;
  out.edges = compute_intensity_bin_edges(
      std::vector<double>(corpus_intensities.begin(),
                          corpus_intensities.end()));
  out.f0 = estimate_piecewise_masses(out.edges, noise_intensities);
  out.f1 = estimate_piecewise_masses(out.edges, emitted_intensities);
  return out;
}

namespace {

struct PairWork {
  ComponentPartition partition;
  std::vector<std::vector<std::vector<int>>> candidates;  // per component
  std::vector<double> theo_intensities;
};

}  // namespace

TrainingState fit(const std::vector<TrainingPair>& pairs,
                  const FitOptions& options) {
  const int n_pairs = static_cast<int>(pairs.size());
  if (n_pairs < 2) {
    throw std::invalid_argument("training requires at least 2 pairs");
  }
  if (!(options.window > 0)) {
    throw std::invalid_argument("window must be positive");
  }
  const int charge = pairs[0].observed.charge;
  for (const TrainingPair& p : pairs) {
    if (p.observed.empty() || p.theoretical.empty()) {
      throw std::invalid_argument("training pair \"" + p.theoretical.id +
                                  "\" has an empty spectrum");
    }
    if (p.observed.charge != charge || p.theoretical.charge != charge) {
      throw std::invalid_argument(
          "training pairs must all share one charge state; pair \"" +
          p.theoretical.id + "\" differs");
    }
  }

  const double w = options.window;
  double r;
  if (options.mz_range_length) {
    r = *options.mz_range_length;
  } else {
    double lo = pairs[0].observed.min_mz();
    double hi = pairs[0].observed.max_mz();
    for (const TrainingPair& p : pairs) {
      lo = std::min(lo, p.observed.min_mz());
      hi = std::max(hi, p.observed.max_mz());
    }
    r = hi - lo;
  }
  if (!(r > 0)) {
    throw std::invalid_argument(
        "observable m/z range length r must be positive; pass an explicit "
        "range for degenerate corpora");
  }

  // Bin edges are fixed once, from the raw training corpus.
  std::vector<double> corpus_intensities;
  for (const TrainingPair& p : pairs) {
    for (const Peak& peak : p.observed.peaks) {
      corpus_intensities.push_back(peak.intensity);
    }
  }
  const auto edges = compute_intensity_bin_edges(corpus_intensities);

  TrainingState state;
  state.seed = options.seed;
  std::set<std::string> seen_warnings;
  const auto warn = [&](const std::string& message) {
    if (seen_warnings.insert(message).second) {
      state.warnings.push_back(message);
    }
  };

  std::vector<PairWork> work(n_pairs);
  std::vector<EmissionConfiguration> configs(n_pairs);
  for (int s = 0; s < n_pairs; ++s) {
    const Spectrum& T = pairs[s].theoretical;
    const Spectrum& O = pairs[s].observed;
    work[s].partition = build_components(T, O, w);
    for (const DroppedEdge& e : work[s].partition.dropped_edges) {
      warn("spectrum \"" + T.id + "\": dropped feasibility edge (" +
           std::to_string(e.theoretical) + ", " + std::to_string(e.observed) +
           ", |dx| = " + format_double(e.distance) +
           ") to fit the enumeration budget");
    }
    for (const Component& c : work[s].partition.components) {
      work[s].candidates.push_back(
          enumerate_component_configurations(c));
    }
    for (const Peak& peak : T.peaks) {
      work[s].theo_intensities.push_back(peak.intensity);
    }
    configs[s] = init_configuration(work[s].partition, T, O, w);
  }

  std::vector<double> mus(n_pairs, 0.0);
  double beta = 0.0;
  double sigma_fallback = w / 2;
  GlobalParams params;
  std::vector<double> cur_ll(n_pairs, 0.0);
  bool have_params = false;

  std::vector<Rng> streams;
  streams.reserve(n_pairs);
  for (int s = 0; s < n_pairs; ++s) {
    streams.emplace_back(substream_seed(options.seed, s));
  }

  const auto spectrum_loglik = [&](int s, const GlobalParams& p,
                                   const EmissionConfiguration& e,
                                   double mu) {
    return complete_data_loglik(pairs[s].observed, pairs[s].theoretical, e, p,
                                mu);
  };

  for (int iter = 1; iter <= options.max_outer_iterations; ++iter) {
    state.iterations = iter;

    // --- 2(a): re-estimate shared parameters from current configurations.
    std::vector<double> residuals;
    std::vector<std::vector<LabeledIntensity>> groups(n_pairs);
    std::vector<double> noise_y, emitted_y;
    for (int s = 0; s < n_pairs; ++s) {
      const Spectrum& T = pairs[s].theoretical;
      const Spectrum& O = pairs[s].observed;
      std::vector<char> emitted_obs(O.size(), 0);
      for (std::size_t i = 0; i < T.size(); ++i) {
        const int j = configs[s].emit_to[i];
        groups[s].push_back(
            LabeledIntensity{T.peaks[i].intensity, j != kNoEmission});
        if (j != kNoEmission) {
          residuals.push_back(O.peaks[j].mz - T.peaks[i].mz);
          emitted_obs[j] = 1;
        }
      }
      for (std::size_t j = 0; j < O.size(); ++j) {
        (emitted_obs[j] ? emitted_y : noise_y).push_back(
            O.peaks[j].intensity);
      }
    }

    std::vector<std::string> step_warnings;
    double sigma_new;
    if (residuals.size() >= 2) {
      sigma_new = estimate_sigma(residuals, w, &step_warnings);
    } else {
      sigma_new = sigma_fallback;
      step_warnings.push_back(
          "fewer than 2 matched residuals; keeping sigma = " +
          format_double(sigma_new));
    }
    LogisticFit logistic = estimate_logistic(groups, beta, mus,
                                             &step_warnings);
    for (const std::string& message : step_warnings) warn(message);

    GlobalParams candidate;
    candidate.sigma = sigma_new;
    candidate.beta = logistic.beta;
    candidate.w = w;
    candidate.r = r;
    candidate.charge = charge;
    candidate.f0 = estimate_piecewise_masses(edges, noise_y);
    candidate.f1 = estimate_piecewise_masses(edges, emitted_y);
    candidate.validate();

    if (!have_params) {
      params = candidate;
      mus = logistic.mus;
      beta = logistic.beta;
      for (int s = 0; s < n_pairs; ++s) {
        cur_ll[s] = spectrum_loglik(s, params, configs[s], mus[s]);
      }
      have_params = true;
    } else {
      // Laplace smoothing keeps the density update slightly off the exact
      // maximizer, so the refresh is acceptance-guarded to preserve the
      // nondecreasing trace.
      std::vector<double> new_ll(n_pairs);
      double total_new = 0.0;
      double total_old = 0.0;
      for (int s = 0; s < n_pairs; ++s) {
        new_ll[s] = spectrum_loglik(s, candidate, configs[s],
                                    logistic.mus[s]);
        total_new += new_ll[s];
        total_old += cur_ll[s];
      }
      if (total_new >= total_old) {
        params = candidate;
        mus = logistic.mus;
        beta = logistic.beta;
        cur_ll = new_ll;
      } else {
        warn("outer iteration " + std::to_string(iter) +
             ": parameter refresh rejected (would lower the likelihood)");
      }
    }
    sigma_fallback = params.sigma;

    // --- 2(b): per-spectrum coordinate ascent over configurations and mu.
    std::vector<std::string> sweep_warnings(n_pairs);
    parallel_for(n_pairs, options.threads, [&](int s) {
      const Spectrum& T = pairs[s].theoretical;
      const int n_components =
          static_cast<int>(work[s].partition.components.size());
      std::vector<int> order(n_components);
      for (int g = 0; g < n_components; ++g) order[g] = g;

      std::vector<char> labels(T.size(), 0);
      EmissionConfiguration trial;
      int sweeps = 0;
      bool changed = true;
      while (changed) {
        if (++sweeps > 1000) {
          sweep_warnings[s] = "spectrum \"" + T.id +
                              "\": configuration sweep cap reached";
          break;
        }
        changed = false;
        streams[s].shuffle(order);
        for (int g : order) {
          const Component& comp = work[s].partition.components[g];
          double best_val = cur_ll[s];
          double best_mu = mus[s];
          const std::vector<int>* best_cfg = nullptr;
          for (const auto& cfg : work[s].candidates[g]) {
            trial = configs[s];
            for (std::size_t p = 0; p < comp.theoretical.size(); ++p) {
              trial.emit_to[comp.theoretical[p]] = cfg[p];
            }
            for (std::size_t i = 0; i < T.size(); ++i) {
              labels[i] = trial.emit_to[i] != kNoEmission;
            }
            const double mu_hat =
                optimize_mu(work[s].theo_intensities, labels, params.beta);
            const double val = spectrum_loglik(s, params, trial, mu_hat);
            if (val > best_val) {
              best_val = val;
              best_mu = mu_hat;
              best_cfg = &cfg;
            }
          }
          if (best_cfg != nullptr) {
            for (std::size_t p = 0; p < comp.theoretical.size(); ++p) {
              configs[s].emit_to[comp.theoretical[p]] = (*best_cfg)[p];
            }
            mus[s] = best_mu;
            cur_ll[s] = best_val;
            changed = true;
          }
        }
      }
      if (!std::isfinite(cur_ll[s])) {
        throw std::runtime_error(
            "non-finite log-likelihood while training spectrum \"" + T.id +
            "\"");
      }
    });
    for (const std::string& message : sweep_warnings) {
      if (!message.empty()) warn(message);
    }

    double total = 0.0;
    for (int s = 0; s < n_pairs; ++s) total += cur_ll[s];
    state.loglik_trace.push_back(total);

    const std::size_t t = state.loglik_trace.size();
    if (t >= 2) {
      const double previous = state.loglik_trace[t - 2];
      const double gain = total - previous;
      if (gain < options.relative_tolerance *
                     std::max(1.0, std::abs(previous))) {
        state.converged = true;
        break;
      }
    }
  }

  state.params = params;
  state.mus = std::move(mus);
  state.configs = std::move(configs);
  state.spectrum_logliks = std::move(cur_ll);
  return state;
}

}  // namespace pepscore
