#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "pepscore/model.hpp"
#include "test_util.hpp"

using namespace pepscore;
using testutil::observed;
using testutil::theoretical;

namespace {

GlobalParams basic_params() {
  GlobalParams p;
  p.sigma = 0.39;
  p.beta = 2.970;
  p.w = 2.0;
  p.r = 1000.0;
  p.charge = 1;
  p.f0 = uniform_piecewise_density(0.0, 1.0);
  p.f1 = uniform_piecewise_density(0.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("logistic emission probability") {
  CHECK(logistic_emission_prob(3.7, 0.0, 0.0) == 0.5);
  // Typical charge +1 parameters at zero intensity.
  CHECK(logistic_emission_prob(0.0, -1.240, 2.970) ==
        doctest::Approx(1.0 / (1.0 + std::exp(1.240))).epsilon(1e-12));
  CHECK(logistic_emission_prob(0.0, -1.240, 2.970) ==
        doctest::Approx(0.2244).epsilon(1e-3));
  // Monotone in intensity when the slope is positive.
  double prev = 0.0;
  for (double y = 0.0; y <= 2.0; y += 0.125) {
    const double p = logistic_emission_prob(y, -1.0, 2.5);
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
  // Saturation stays inside the open interval, with no overflow.
  CHECK(logistic_emission_prob(1.0, 700.0, 10.0) < 1.0);
  CHECK(logistic_emission_prob(1.0, 700.0, 10.0) > 0.999);
  CHECK(logistic_emission_prob(1.0, -700.0, -10.0) > 0.0);
  CHECK(logistic_emission_prob(1.0, -700.0, -10.0) < 1e-300);
}

TEST_CASE("truncated normal log density") {
  CHECK(truncated_normal_logpdf(102.0 + 1e-9, 100.0, 0.39, 2.0) ==
        -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(truncated_normal_logpdf(102.0, 100.0, 0.39, 2.0)));
  // Symmetry about the center.
  CHECK(truncated_normal_logpdf(100.7, 100.0, 0.39, 2.0) ==
        doctest::Approx(truncated_normal_logpdf(99.3, 100.0, 0.39, 2.0))
            .epsilon(1e-15));
  // Density at the center: 1/(sigma*sqrt(2*pi)*Z).
  CHECK(truncated_normal_logpdf(100.0, 100.0, 0.39, 2.0) ==
        doctest::Approx(0.0227).epsilon(0.02));
  CHECK_THROWS_AS(truncated_normal_logpdf(0.0, 0.0, -1.0, 2.0),
                  std::invalid_argument);
}

TEST_CASE("truncated normal integrates to one") {
  for (double sigma : {0.05, 0.39, 1.0}) {
    const double integral = oracle::integrate(
        [&](double x) {
          return std::exp(truncated_normal_logpdf(x, 100.0, sigma, 2.0));
        },
        98.0, 102.0, 40000);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("piecewise density lookups") {
  const PiecewiseDensity uniform = uniform_piecewise_density(0.0, 1.0);
  CHECK(uniform.logpdf(0.37) == doctest::Approx(0.0).epsilon(1e-12));

  PiecewiseDensity d;
  for (int b = 0; b <= 10; ++b) d.edges[b] = b;
  d.masses.fill(0.5 / 9.0);
  d.masses[0] = 0.5;
  d.validate();
  CHECK(d.logpdf(0.2) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(d.logpdf(1.5) == doctest::Approx(std::log(0.5 / 9.0)).epsilon(1e-12));

  PiecewiseDensity zero_bin = d;
  zero_bin.masses[1] = 0.0;
  zero_bin.masses[0] = 0.5 + 0.5 / 9.0;
  zero_bin.validate();
  CHECK(zero_bin.logpdf(1.5) == -std::numeric_limits<double>::infinity());

  // Out-of-range values clamp into the boundary bins.
  CHECK(d.logpdf(-3.0) == d.logpdf(0.2));
  CHECK(d.logpdf(42.0) == d.logpdf(9.5));
  CHECK(d.logpdf(10.0) == d.logpdf(9.5));  // final bin right-closed
}

TEST_CASE("piecewise density mass sums and integral") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const PiecewiseDensity d = testutil::random_density(rng, 0.0, 1.3);
    double total = 0.0;
    for (double mass : d.masses) total += mass;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(oracle::integrate_piecewise(d) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("piecewise density validation rejects bad inputs") {
  PiecewiseDensity d = uniform_piecewise_density(0.0, 1.0);
  d.masses[0] += 0.1;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d = uniform_piecewise_density(0.0, 1.0);
  d.edges[3] = d.edges[2];
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("build_components on disconnected peaks") {
  const Spectrum T = theoretical({{100.0, 1.0}, {200.0, 0.5}, {300.0, 0.2}});
  const Spectrum O = observed({{150.0, 1.0}, {250.0, 1.0}});
  const auto partition = build_components(T, O, 2.0);
  REQUIRE(partition.components.size() == 3);
  for (const Component& c : partition.components) {
    CHECK(c.theoretical.size() == 1);
    CHECK(c.observed.empty());
    const auto configs = enumerate_component_configurations(c);
    REQUIRE(configs.size() == 1);  // only the all-zero configuration
    CHECK(configs[0][0] == kNoEmission);
  }
}

TEST_CASE("one theoretical peak near two observed peaks") {
  const Spectrum T = theoretical({{100.0, 1.0}});
  const Spectrum O = observed({{99.5, 1.0}, {100.5, 1.0}});
  const auto partition = build_components(T, O, 2.0);
  REQUIRE(partition.components.size() == 1);
  CHECK(partition.components[0].observed.size() == 2);
  const auto configs =
      enumerate_component_configurations(partition.components[0]);
  CHECK(configs.size() == 3);  // none / first / second
}

TEST_CASE("fully connected 2x2 component has 7 configurations") {
  const Spectrum T = theoretical({{100.0, 1.0}, {100.5, 0.5}});
  const Spectrum O = observed({{99.9, 1.0}, {100.6, 0.5}});
  const auto partition = build_components(T, O, 2.0);
  REQUIRE(partition.components.size() == 1);
  CHECK(count_component_configurations(partition.components[0], 1000) == 7);
  const auto configs =
      enumerate_component_configurations(partition.components[0]);
  CHECK(configs.size() == 7);
  // Against the independent recursive enumeration.
  CHECK(oracle::enumerate_all_configs(T, O, 2.0).size() == 7);
}

TEST_CASE("configuration counts match the combinatorial formula") {
  // Fully connected a x b bipartite graphs: sum_k C(a,k) C(b,k) k!.
  const auto closed_form = [](int a, int b) {
    auto choose = [](int n, int k) {
      double v = 1.0;
      for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
      return v;
    };
    double total = 0.0;
    for (int k = 0; k <= std::min(a, b); ++k) {
      double kfact = 1.0;
      for (int i = 2; i <= k; ++i) kfact *= i;
      total += choose(a, k) * choose(b, k) * kfact;
    }
    return static_cast<std::uint64_t>(std::llround(total));
  };
  for (int a = 1; a <= 4; ++a) {
    for (int b = 1; b <= 4; ++b) {
      std::vector<Peak> tp, op;
      for (int i = 0; i < a; ++i) tp.push_back({100.0 + 0.01 * i, 1.0});
      for (int j = 0; j < b; ++j) op.push_back({100.0 + 0.01 * j + 0.005, 1.0});
      const Spectrum T = theoretical(std::move(tp));
      const Spectrum O = observed(std::move(op));
      const auto partition = build_components(T, O, 2.0);
      REQUIRE(partition.components.size() == 1);
      CHECK(count_component_configurations(partition.components[0],
                                           1000000) == closed_form(a, b));
      CHECK(oracle::enumerate_all_configs(T, O, 2.0).size() ==
            closed_form(a, b));
    }
  }
}

TEST_CASE("enumeration respects pairwise feasibility inside a component") {
  // Chain T1-O1-T2-O2: one component, but the pair (T1, O2) is out of
  // window and must never appear.
  const Spectrum T = theoretical({{100.0, 1.0}, {101.0, 1.0}});
  const Spectrum O = observed({{99.0, 1.0}, {102.5, 1.0}});
  const auto partition = build_components(T, O, 2.0);
  REQUIRE(partition.components.size() == 1);
  const auto configs =
      enumerate_component_configurations(partition.components[0]);
  for (const auto& cfg : configs) {
    CHECK(cfg[0] != 1);  // |100 - 102.5| > 2
  }
  CHECK(configs.size() == oracle::enumerate_all_configs(T, O, 2.0).size());
}

TEST_CASE("enumeration budget produces an explicit overflow error") {
  std::vector<Peak> tp, op;
  for (int i = 0; i < 10; ++i) tp.push_back({100.0 + 0.01 * i, 1.0});
  for (int j = 0; j < 10; ++j) op.push_back({100.0 + 0.01 * j + 0.005, 1.0});
  const Spectrum T = theoretical(std::move(tp));
  const Spectrum O = observed(std::move(op));
  const auto partition = build_components(T, O, 2.0);  // default budget fits
  REQUIRE(partition.components.size() == 1);
  CHECK_THROWS_AS(
      enumerate_component_configurations(partition.components[0], 1000),
      EnumerationOverflow);
}

TEST_CASE("over-budget components are split by dropping the widest edges") {
  // 10x10 fully connected blows a small budget; the fallback must produce
  // components that all fit, and record what it dropped.
  std::vector<Peak> tp, op;
  for (int i = 0; i < 10; ++i) tp.push_back({100.0 + 0.01 * i, 1.0});
  for (int j = 0; j < 10; ++j) op.push_back({100.0 + 0.01 * j + 0.005, 1.0});
  const Spectrum T = theoretical(std::move(tp));
  const Spectrum O = observed(std::move(op));
  const auto partition = build_components(T, O, 2.0, 500);
  CHECK(!partition.dropped_edges.empty());
  for (const Component& c : partition.components) {
    CHECK(count_component_configurations(c, 500) <= 500);
    CHECK_NOTHROW(enumerate_component_configurations(c, 500));
  }
  // Every theoretical peak still appears exactly once.
  std::set<int> seen;
  for (const Component& c : partition.components) {
    for (int i : c.theoretical) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("complete-data log-likelihood: all-noise configuration") {
  const GlobalParams p = basic_params();
  const Spectrum T = theoretical({{100.0, 1.0}, {104.0, 0.3}});
  const Spectrum O = observed({{150.0, 0.5}, {160.0, 0.7}});
  EmissionConfiguration e;
  e.emit_to = {kNoEmission, kNoEmission};

  const double got = complete_data_loglik(O, T, e, p, -0.5);
  // By hand: log[(m-0)!/m!] = 0, sum log(1-g), 2*log(1/r), sum log f0.
  double expected = 0.0;
  expected += std::log(1.0 - 1.0 / (1.0 + std::exp(-(-0.5 + 2.970 * 1.0))));
  expected += std::log(1.0 - 1.0 / (1.0 + std::exp(-(-0.5 + 2.970 * 0.3))));
  expected += 2.0 * std::log(1.0 / 1000.0);
  expected += std::log(1.0) + std::log(1.0);  // uniform f0 on [0,1]
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(got ==
        doctest::Approx(oracle::complete_loglik(O, T, e.emit_to, p, -0.5))
            .epsilon(1e-12));
}

TEST_CASE("complete-data log-likelihood: single emission by hand") {
  const GlobalParams p = basic_params();
  const Spectrum T = theoretical({{100.0, 1.0}});
  const Spectrum O = observed({{100.1, 1.0}, {500.0, 0.5}});
  EmissionConfiguration e;
  e.emit_to = {0};
  const double mu = -0.2;

  const double got = complete_data_loglik(O, T, e, p, mu);
  const double g = 1.0 / (1.0 + std::exp(-(mu + 2.970 * 1.0)));
  double expected = std::log(g);
  expected += truncated_normal_logpdf(100.1, 100.0, 0.39, 2.0);
  expected += p.f1.logpdf(1.0);
  expected += std::log(1.0 / 1000.0);
  expected += p.f0.logpdf(0.5);
  expected += std::log(1.0) - std::log(2.0);  // (m-k)!/m! with m=2, k=1
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(got == doctest::Approx(oracle::complete_loglik(O, T, e.emit_to, p, mu))
                   .epsilon(1e-12));
}

TEST_CASE("factorial term appears exactly once") {
  const GlobalParams p = basic_params();
  const Spectrum T = theoretical({{100.0, 0.8}});
  const Spectrum O = observed({{100.2, 0.6}, {101.0, 0.4}});
  EmissionConfiguration none, first;
  none.emit_to = {kNoEmission};
  first.emit_to = {0};
  const double mu = 0.3;
  const double delta = complete_data_loglik(O, T, first, p, mu) -
                       complete_data_loglik(O, T, none, p, mu);
  // Hand difference: +logit gain, +location, +f1-f0 swap, +log r, -log 2.
  const double t = mu + p.beta * 0.8;
  double expected = t;  // log g - log(1-g)
  expected += truncated_normal_logpdf(100.2, 100.0, p.sigma, p.w);
  expected += p.f1.logpdf(0.6) - p.f0.logpdf(0.6);
  expected += std::log(p.r);
  expected -= std::log(2.0);
  CHECK(delta == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("complete-data log-likelihood rejects infeasible configurations") {
  const GlobalParams p = basic_params();
  const Spectrum T = theoretical({{100.0, 1.0}, {101.0, 1.0}});
  const Spectrum O = observed({{100.1, 1.0}, {300.0, 1.0}});
  EmissionConfiguration out_of_window, duplicated;
  out_of_window.emit_to = {1, kNoEmission};  // 300 is far beyond w
  duplicated.emit_to = {0, 0};
  CHECK_THROWS_AS(complete_data_loglik(O, T, out_of_window, p, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(complete_data_loglik(O, T, duplicated, p, 0.0),
                  std::invalid_argument);
}

TEST_CASE("complete-data log-likelihood is label-order invariant") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = testutil::make_tiny_instance(rng);
    const auto configs =
        oracle::enumerate_all_configs(inst.theoretical, inst.observed, 2.0);
    for (const auto& cfg : configs) {
      EmissionConfiguration e;
      e.emit_to = cfg;
      // Feeding the peaks in reversed order sorts back to the same spectrum,
      // so the value must be bit-identical.
      std::vector<Peak> rev_t(inst.theoretical.peaks.rbegin(),
                              inst.theoretical.peaks.rend());
      std::vector<Peak> rev_o(inst.observed.peaks.rbegin(),
                              inst.observed.peaks.rend());
      const Spectrum T2 = theoretical(std::move(rev_t));
      const Spectrum O2 = observed(std::move(rev_o));
      const double a =
          complete_data_loglik(inst.observed, inst.theoretical, e,
                               inst.params, 0.25);
      const double b = complete_data_loglik(O2, T2, e, inst.params, 0.25);
      CHECK(a == b);
    }
  }
}

TEST_CASE("brute-force likelihood equals the single-configuration value") {
  const GlobalParams p = basic_params();
  const Spectrum T = theoretical({{100.0, 1.0}});
  const Spectrum O = observed({{300.0, 0.5}});  // nothing within w
  EmissionConfiguration none;
  none.emit_to = {kNoEmission};
  CHECK(full_loglik_bruteforce(O, T, p, 0.1) ==
        doctest::Approx(complete_data_loglik(O, T, none, p, 0.1))
            .epsilon(1e-12));
}

TEST_CASE("brute-force likelihood: three-term log-sum-exp by hand") {
  const GlobalParams p = basic_params();
  const Spectrum T = theoretical({{100.0, 1.0}});
  const Spectrum O = observed({{99.8, 0.9}, {100.4, 0.2}});
  const double mu = -0.3;
  std::vector<double> terms;
  for (const auto& cfg : oracle::enumerate_all_configs(T, O, p.w)) {
    terms.push_back(oracle::complete_loglik(O, T, cfg, p, mu));
  }
  REQUIRE(terms.size() == 3);
  const double peak = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  CHECK(full_loglik_bruteforce(O, T, p, mu) ==
        doctest::Approx(peak + std::log(sum)).epsilon(1e-12));
}

TEST_CASE("brute-force likelihood dominates every configuration") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = testutil::make_tiny_instance(rng);
    const double mu = rng.uniform(-3.0, 3.0);
    const double full =
        full_loglik_bruteforce(inst.observed, inst.theoretical, inst.params,
                               mu);
    double best = -std::numeric_limits<double>::infinity();
    double second = best;
    for (const auto& cfg : oracle::enumerate_all_configs(
             inst.theoretical, inst.observed, inst.params.w)) {
      EmissionConfiguration e;
      e.emit_to = cfg;
      const double v = complete_data_loglik(inst.observed, inst.theoretical,
                                            e, inst.params, mu);
      if (v > best) {
        second = best;
        best = v;
      } else if (v > second) {
        second = v;
      }
    }
    CHECK(full >= best - 1e-12);
    // Strictly larger unless a single configuration numerically dominates.
    if (best - second < 30.0) CHECK(full > best);
  }
}

TEST_CASE("params document round-trips and validates") {
  GlobalParams p = basic_params();
  p.charge = 2;
  const GlobalParams back = parse_params(serialize_params(p));
  CHECK(back.sigma == p.sigma);
  CHECK(back.beta == p.beta);
  CHECK(back.w == p.w);
  CHECK(back.r == p.r);
  CHECK(back.charge == 2);
  for (int b = 0; b < 10; ++b) {
    CHECK(back.f0.masses[b] == p.f0.masses[b]);
    CHECK(back.f1.masses[b] == p.f1.masses[b]);
  }
  CHECK_THROWS_AS(parse_params("{}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_params("not json"), std::invalid_argument);

  GlobalParams bad = basic_params();
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = basic_params();
  bad.f1.edges[4] += 0.01;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
