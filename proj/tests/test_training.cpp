#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pepscore/training.hpp"
#include "test_util.hpp"

using namespace pepscore;
using testutil::observed;
using testutil::theoretical;

namespace {

// Truncated-normal log-likelihood in sigma, written independently.
double tn_loglik_at_sigma(std::span<const double> residuals, double sigma,
                          double w) {
  double ll = 0.0;
  for (double x : residuals) ll += -0.5 * x * x / (sigma * sigma);
  const double n = static_cast<double>(residuals.size());
  ll -= n * std::log(sigma);
  ll -= n * std::log(std::erf(w / (sigma * std::sqrt(2.0))));
  return ll;
}

double grid_argmax_sigma(std::span<const double> residuals, double w) {
  double best_sigma = 1e-4;
  double best = -std::numeric_limits<double>::infinity();
  for (double ls = std::log(1e-4); ls <= std::log(w); ls += 1e-4) {
    const double sigma = std::exp(ls);
    const double ll = tn_loglik_at_sigma(residuals, sigma, w);
    if (ll > best) {
      best = ll;
      best_sigma = sigma;
    }
  }
  return best_sigma;
}

// Minimal generative draw used by the fit tests; independent of the
// simulator module.
TrainingPair draw_pair(Rng& rng, const std::string& id, int n_peaks,
                       double mu, double beta, double sigma, double w,
                       double lo, double hi,
                       EmissionConfiguration* truth = nullptr) {
  std::vector<Peak> theo;
  for (int i = 0; i < n_peaks; ++i) {
    double mz = rng.uniform(lo, hi);
    theo.push_back(Peak{mz, rng.uniform(0.0, 1.3)});
  }
  Spectrum T = theoretical(std::move(theo), 1, id);

  std::vector<std::pair<Peak, int>> draws;
  for (int i = 0; i < n_peaks; ++i) {
    const double p = logistic_emission_prob(T.peaks[i].intensity, mu, beta);
    if (rng.bernoulli(p)) {
      double x;
      do {
        x = T.peaks[i].mz + sigma * rng.normal();
      } while (std::abs(x - T.peaks[i].mz) > w);
      draws.push_back({Peak{x, 0.3 + rng.uniform()}, i});
    }
  }
  const int noise = static_cast<int>(0.9 * n_peaks);
  for (int c = 0; c < noise; ++c) {
    draws.push_back({Peak{rng.uniform(lo, hi), 0.05 + 0.8 * rng.uniform()},
                     kNoEmission});
  }
  std::sort(draws.begin(), draws.end(), [](const auto& a, const auto& b) {
    return a.first.mz < b.first.mz;
  });
  std::vector<Peak> obs;
  if (truth) truth->emit_to.assign(n_peaks, kNoEmission);
  for (std::size_t j = 0; j < draws.size(); ++j) {
    obs.push_back(draws[j].first);
    if (truth && draws[j].second != kNoEmission) {
      truth->emit_to[draws[j].second] = static_cast<int>(j);
    }
  }
  return TrainingPair{observed(std::move(obs), 1, id), std::move(T)};
}

std::vector<TrainingPair> draw_corpus(std::uint64_t seed, int n_pairs,
                                      double mu, double beta, double sigma) {
  std::vector<TrainingPair> pairs;
  Rng rng(seed);
  for (int s = 0; s < n_pairs; ++s) {
    pairs.push_back(draw_pair(rng, "pair-" + std::to_string(s), 40, mu, beta,
                              sigma, 2.0, 200.0, 1800.0));
  }
  return pairs;
}

}  // namespace

TEST_CASE("greedy initial configuration picks the nearest pair") {
  const Spectrum T = theoretical({{100.0, 1.0}});
  const Spectrum O = observed({{100.3, 1.0}, {101.9, 0.5}});
  const auto partition = build_components(T, O, 2.0);
  const auto e = init_configuration(partition, T, O, 2.0);
  CHECK(e.emit_to == std::vector<int>{0});
}

TEST_CASE("greedy initial configuration tie rule") {
  // Two theoretical peaks exactly equidistant from one observed peak: the
  // lower theoretical index wins, the other stays unassigned.
  const Spectrum T = theoretical({{99.5, 1.0}, {100.5, 1.0}});
  const Spectrum O = observed({{100.0, 1.0}});
  const auto partition = build_components(T, O, 2.0);
  const auto e = init_configuration(partition, T, O, 2.0);
  CHECK(e.emit_to == std::vector<int>{0, kNoEmission});
}

TEST_CASE("greedy initial configuration is feasible on dense components") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = testutil::make_tiny_instance(rng);
    const auto partition =
        build_components(inst.theoretical, inst.observed, inst.params.w);
    const auto e = init_configuration(partition, inst.theoretical,
                                      inst.observed, inst.params.w);
    CHECK(is_feasible(e, inst.theoretical, inst.observed, inst.params.w));
    // Greedy matches every peak that can be matched when peaks remain.
    const auto all =
        oracle::enumerate_all_configs(inst.theoretical, inst.observed,
                                      inst.params.w);
    int max_k = 0;
    for (const auto& cfg : all) {
      int k = 0;
      for (int j : cfg) k += j >= 0;
      max_k = std::max(max_k, k);
    }
    CHECK(e.emitted_count() <= max_k);
  }
}

TEST_CASE("sigma estimate matches a dense grid search") {
  SUBCASE("two symmetric residuals") {
    const std::vector<double> residuals{-0.1, 0.1};
    const double est = estimate_sigma(residuals, 2.0);
    CHECK(est == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(est ==
          doctest::Approx(grid_argmax_sigma(residuals, 2.0)).epsilon(1e-3));
  }
  SUBCASE("random pools") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> residuals;
      const double sigma = rng.uniform(0.1, 0.6);
      for (int i = 0; i < 200; ++i) {
        double x;
        do {
          x = sigma * rng.normal();
        } while (std::abs(x) > 2.0);
        residuals.push_back(x);
      }
      const double est = estimate_sigma(residuals, 2.0);
      CHECK(est == doctest::Approx(grid_argmax_sigma(residuals, 2.0))
                       .epsilon(1e-3));
    }
  }
}

TEST_CASE("sigma estimate recovers the truth from a large sample") {
  Rng rng(17);
  std::vector<double> residuals;
  const double sigma = 0.16;
  for (int i = 0; i < 100000; ++i) {
    double x;
    do {
      x = sigma * rng.normal();
    } while (std::abs(x) > 2.0);
    residuals.push_back(x);
  }
  const double est = estimate_sigma(residuals, 2.0);
  CHECK(est == doctest::Approx(sigma).epsilon(0.01));  // within 1%
  // In this sigma << w regime the estimate is essentially the RMS.
  double sum_sq = 0.0;
  for (double x : residuals) sum_sq += x * x;
  CHECK(est == doctest::Approx(std::sqrt(sum_sq / residuals.size()))
                   .epsilon(1e-3));
}

TEST_CASE("sigma estimate boundary cases carry warnings") {
  std::vector<std::string> warnings;
  CHECK(estimate_sigma(std::vector<double>{0.0, 0.0, 0.0}, 2.0, &warnings) ==
        1e-4);
  CHECK(warnings.size() == 1);
  warnings.clear();
  CHECK(estimate_sigma(std::vector<double>{-2.0, 2.0, -2.0, 2.0}, 2.0,
                       &warnings) == 2.0);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(estimate_sigma(std::vector<double>{0.1}, 2.0),
                  std::invalid_argument);
}

TEST_CASE("mu optimization agrees with a fine grid") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(30));
    std::vector<double> ys;
    std::vector<char> zs;
    for (int i = 0; i < n; ++i) {
      ys.push_back(rng.uniform(0.0, 1.3));
      zs.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    const double beta = rng.uniform(0.0, 5.0);
    const double est = optimize_mu(ys, zs, beta);

    double best_mu = -15.0;
    double best = -std::numeric_limits<double>::infinity();
    for (double mu = -15.0; mu <= 15.0; mu += 1e-3) {
      double ll = 0.0;
      for (int i = 0; i < n; ++i) {
        ll += zs[i] ? oracle::log_g(ys[i], mu, beta)
                    : oracle::log_one_minus_g(ys[i], mu, beta);
      }
      if (ll > best) {
        best = ll;
        best_mu = mu;
      }
    }
    CHECK(est == doctest::Approx(best_mu).epsilon(5e-3));
  }
}

TEST_CASE("mu optimization clamps under separation") {
  const std::vector<double> ys{0.2, 0.5, 1.0};
  CHECK(optimize_mu(ys, std::vector<char>{1, 1, 1}, 2.0) == kMuBound);
  CHECK(optimize_mu(ys, std::vector<char>{0, 0, 0}, 2.0) == -kMuBound);
}

TEST_CASE("grouped logistic: separation warning and clamped intercept") {
  std::vector<std::vector<LabeledIntensity>> groups(2);
  for (int i = 0; i < 10; ++i) {
    groups[0].push_back({0.1 * i, true});           // all emitted
    groups[1].push_back({0.1 * i, i % 2 == 0});     // mixed
  }
  std::vector<std::string> warnings;
  const auto fit = estimate_logistic(groups, 0.0, {0.0, 0.0}, &warnings);
  CHECK(fit.mus[0] == kMuBound);
  REQUIRE(!warnings.empty());
  CHECK(warnings[0].find("separation") != std::string::npos);
}

TEST_CASE("grouped logistic: labels independent of intensity give beta near 0") {
  Rng rng(77);
  std::vector<std::vector<LabeledIntensity>> groups(20);
  for (auto& g : groups) {
    for (int i = 0; i < 60; ++i) {
      g.push_back({rng.uniform(0.0, 1.3), rng.bernoulli(0.5)});
    }
  }
  const auto fit =
      estimate_logistic(groups, 0.0, std::vector<double>(20, 0.0));
  CHECK(std::abs(fit.beta) < 0.3);
}

TEST_CASE("grouped logistic recovers a known slope") {
  // Labels drawn from the model itself at beta = 2.970 with scattered
  // intercepts; the pooled estimate should land within a few sd.
  Rng rng(123);
  const double beta_true = 2.970;
  std::vector<std::vector<LabeledIntensity>> groups(50);
  std::vector<double> mu_true(50);
  for (int s = 0; s < 50; ++s) {
    mu_true[s] = -1.24 + rng.uniform(-0.3, 0.3);
    for (int i = 0; i < 40; ++i) {
      const double y = rng.uniform(0.0, 1.3);
      groups[s].push_back(
          {y, rng.bernoulli(logistic_emission_prob(y, mu_true[s], beta_true))});
    }
  }
  const auto fit =
      estimate_logistic(groups, 0.0, std::vector<double>(50, 0.0));
  CHECK(fit.beta == doctest::Approx(beta_true).epsilon(0.2));

  // Gradient at the optimum vanishes (the oracle-side stationarity check).
  double g_beta = 0.0;
  for (int s = 0; s < 50; ++s) {
    for (const auto& li : groups[s]) {
      const double p =
          logistic_emission_prob(li.intensity, fit.mus[s], fit.beta);
      g_beta += ((li.emitted ? 1.0 : 0.0) - p) * li.intensity;
    }
  }
  CHECK(std::abs(g_beta) < 1e-6);
}

TEST_CASE("bin edges follow the nearest-rank recipe") {
  // 1000 values 0.001..1.000: the top 1% starts at the 990th order stat.
  std::vector<double> values;
  for (int i = 1; i <= 1000; ++i) values.push_back(i / 1000.0);
  const auto edges = compute_intensity_bin_edges(values);
  CHECK(edges[0] == 0.0);
  CHECK(edges[10] == 1.0);
  CHECK(edges[9] == doctest::Approx(0.990));
  // Lower 99% = first 990 values, 9 equal-count bins of 110 values each.
  for (int t = 1; t <= 8; ++t) {
    CHECK(edges[t] == doctest::Approx((110.0 * t) / 1000.0));
  }
}

TEST_CASE("bin edges reject tied corpora") {
  CHECK_THROWS_WITH_AS(
      compute_intensity_bin_edges(std::vector<double>(100, 0.5)),
      doctest::Contains("duplicate"), std::invalid_argument);
  std::vector<double> nine_distinct;
  for (int i = 0; i < 90; ++i) nine_distinct.push_back((i % 9) * 0.1 + 0.05);
  CHECK_THROWS_AS(compute_intensity_bin_edges(nine_distinct),
                  std::invalid_argument);
}

TEST_CASE("piecewise masses use Laplace smoothing") {
  std::array<double, 11> edges{};
  for (int b = 0; b <= 10; ++b) edges[b] = 0.1 * b;
  // 5 values in bin 0, nothing anywhere else.
  const std::vector<double> values{0.01, 0.02, 0.03, 0.04, 0.05};
  const auto d = estimate_piecewise_masses(edges, values);
  CHECK(d.masses[0] == doctest::Approx(6.0 / 15.0).epsilon(1e-12));
  for (int b = 1; b < 10; ++b) {
    CHECK(d.masses[b] == doctest::Approx(1.0 / 15.0).epsilon(1e-12));
  }
}

TEST_CASE("estimated masses track the underlying distribution") {
  Rng rng(9);
  std::array<double, 11> edges{};
  for (int b = 0; b <= 10; ++b) edges[b] = 0.1 * b;
  std::vector<double> values;
  for (int i = 0; i < 50000; ++i) values.push_back(rng.uniform());
  const auto d = estimate_piecewise_masses(edges, values);
  for (int b = 0; b < 10; ++b) {
    CHECK(d.masses[b] == doctest::Approx(0.1).epsilon(0.2));
    CHECK(std::abs(d.masses[b] - 0.1) < 0.02);
  }
}

TEST_CASE("estimate_densities: random labels give matching f0 and f1") {
  Rng rng(14);
  std::vector<double> corpus, noise, emitted;
  for (int i = 0; i < 40000; ++i) {
    const double y = rng.uniform();
    corpus.push_back(y);
    (rng.bernoulli(0.5) ? emitted : noise).push_back(y);
  }
  const DensityEstimates est = estimate_densities(corpus, noise, emitted);
  for (int b = 0; b < 10; ++b) {
    CHECK(std::abs(est.f0.masses[b] - est.f1.masses[b]) < 0.02);
    // Equal-count edges put about a tenth of the data in each bin except
    // the split top pair (bins 8 and 9 share the last ninth).
    CHECK(est.f0.edges[b] == est.f1.edges[b]);
  }
}

TEST_CASE("estimate_densities: emitted mass concentrates where emitted live") {
  Rng rng(15);
  std::vector<double> corpus, noise, emitted;
  for (int i = 0; i < 5000; ++i) {
    const double y = rng.uniform();
    corpus.push_back(y);
    if (y < 0.9) noise.push_back(y);
  }
  const auto edges = compute_intensity_bin_edges(corpus);
  // Emitted intensities all above the 99th-percentile edge: top bin only.
  for (int i = 0; i < 500; ++i) {
    emitted.push_back(edges[9] + (edges[10] - edges[9]) * rng.uniform());
  }
  const DensityEstimates est = estimate_densities(corpus, noise, emitted);
  CHECK(est.f1.masses[9] == doctest::Approx(501.0 / 510.0).epsilon(1e-12));
  for (int b = 0; b < 9; ++b) {
    CHECK(est.f1.masses[b] == doctest::Approx(1.0 / 510.0).epsilon(1e-12));
  }
}

TEST_CASE("fit logs feasibility edges dropped by the budget fallback") {
  // A fully connected 10x12 cluster has ~2.8e8 configurations, far past the
  // default budget, so the fallback must fire and leave a warning trail.
  Rng rng(77);
  std::vector<TrainingPair> pairs;
  // Enough plain peaks that the corpus top-1% bin stays separable.
  pairs.push_back(draw_pair(rng, "plain-a", 40, -1.0, 3.0, 0.3, 2.0, 200.0,
                            1800.0));
  pairs.push_back(draw_pair(rng, "plain-b", 40, -1.0, 3.0, 0.3, 2.0, 200.0,
                            1800.0));
  std::vector<Peak> dense_t, dense_o;
  for (int i = 0; i < 10; ++i) {
    dense_t.push_back({500.0 + 0.01 * i, 0.2 + 0.1 * i});
  }
  for (int j = 0; j < 12; ++j) {
    dense_o.push_back({500.005 + 0.01 * j, 0.15 + 0.09 * j});
  }
  pairs.push_back(TrainingPair{observed(std::move(dense_o), 1, "dense"),
                               theoretical(std::move(dense_t), 1, "dense")});

  FitOptions options;
  options.mz_range_length = 1600.0;
  const TrainingState state = fit(pairs, options);
  bool saw_drop = false;
  for (const std::string& w : state.warnings) {
    saw_drop = saw_drop || w.find("dropped feasibility edge") !=
                               std::string::npos;
  }
  CHECK(saw_drop);
  CHECK(is_feasible(state.configs[2], pairs[2].theoretical,
                    pairs[2].observed, options.window));
}

TEST_CASE("fit produces a nondecreasing likelihood trace and converges") {
  const auto pairs = draw_corpus(2024, 12, -1.24, 2.97, 0.39);
  FitOptions options;
  options.seed = 7;
  options.mz_range_length = 1600.0;
  const TrainingState state = fit(pairs, options);

  REQUIRE(!state.loglik_trace.empty());
  for (std::size_t t = 1; t < state.loglik_trace.size(); ++t) {
    CHECK(state.loglik_trace[t] >= state.loglik_trace[t - 1]);
  }
  CHECK(state.converged);
  CHECK(state.iterations <= 100);

  // Every final configuration is feasible; the recorded log-likelihoods
  // match a recomputation through the canonical path.
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    CHECK(is_feasible(state.configs[s], pairs[s].theoretical,
                      pairs[s].observed, options.window));
    CHECK(state.spectrum_logliks[s] ==
          doctest::Approx(complete_data_loglik(
                              pairs[s].observed, pairs[s].theoretical,
                              state.configs[s], state.params, state.mus[s]))
              .epsilon(1e-12));
  }
}

TEST_CASE("fit is bit-reproducible for a fixed seed") {
  const auto pairs = draw_corpus(55, 8, -1.24, 2.97, 0.39);
  FitOptions options;
  options.seed = 99;
  options.mz_range_length = 1600.0;
  const TrainingState a = fit(pairs, options);
  const TrainingState b = fit(pairs, options);
  CHECK(a.params.sigma == b.params.sigma);
  CHECK(a.params.beta == b.params.beta);
  REQUIRE(a.loglik_trace.size() == b.loglik_trace.size());
  for (std::size_t t = 0; t < a.loglik_trace.size(); ++t) {
    CHECK(a.loglik_trace[t] == b.loglik_trace[t]);
  }
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    CHECK(a.mus[s] == b.mus[s]);
    CHECK(a.configs[s].emit_to == b.configs[s].emit_to);
  }
  for (int bn = 0; bn < 10; ++bn) {
    CHECK(a.params.f0.masses[bn] == b.params.f0.masses[bn]);
    CHECK(a.params.f1.masses[bn] == b.params.f1.masses[bn]);
  }
}

TEST_CASE("fit is invariant to the worker count") {
  const auto pairs = draw_corpus(56, 8, -1.24, 2.97, 0.39);
  FitOptions options;
  options.seed = 4;
  options.mz_range_length = 1600.0;
  const TrainingState one = fit(pairs, options);
  options.threads = 4;
  const TrainingState four = fit(pairs, options);
  CHECK(one.params.sigma == four.params.sigma);
  CHECK(one.params.beta == four.params.beta);
  REQUIRE(one.loglik_trace.size() == four.loglik_trace.size());
  CHECK(one.loglik_trace.back() == four.loglik_trace.back());
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    CHECK(one.mus[s] == four.mus[s]);
  }
}

TEST_CASE("fit ends component-wise locally optimal on small corpora") {
  const auto pairs = draw_corpus(654, 4, -0.8, 2.5, 0.3);
  FitOptions options;
  options.seed = 11;
  options.mz_range_length = 1600.0;
  const TrainingState state = fit(pairs, options);

  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const Spectrum& T = pairs[s].theoretical;
    const Spectrum& O = pairs[s].observed;
    const auto partition = build_components(T, O, options.window);
    std::vector<double> ys;
    for (const Peak& p : T.peaks) ys.push_back(p.intensity);
    for (const Component& comp : partition.components) {
      for (const auto& cfg : enumerate_component_configurations(comp)) {
        EmissionConfiguration trial = state.configs[s];
        for (std::size_t p = 0; p < comp.theoretical.size(); ++p) {
          trial.emit_to[comp.theoretical[p]] = cfg[p];
        }
        std::vector<char> labels(T.size());
        for (std::size_t i = 0; i < T.size(); ++i) {
          labels[i] = trial.emit_to[i] != kNoEmission;
        }
        const double mu_hat = optimize_mu(ys, labels, state.params.beta);
        const double val =
            complete_data_loglik(O, T, trial, state.params, mu_hat);
        CHECK(val <= state.spectrum_logliks[s] + 1e-9);
      }
    }
  }
}

TEST_CASE("fit validates its inputs") {
  auto pairs = draw_corpus(3, 2, -1.0, 3.0, 0.3);
  CHECK_THROWS_AS(fit({pairs[0]}, FitOptions{}), std::invalid_argument);

  auto mixed = pairs;
  mixed[1].observed.charge = 2;
  mixed[1].theoretical.charge = 2;
  CHECK_THROWS_WITH_AS(fit(mixed, FitOptions{}),
                       doctest::Contains("charge"), std::invalid_argument);
}
