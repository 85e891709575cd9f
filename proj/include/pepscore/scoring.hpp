#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pepscore/model.hpp"
#include "pepscore/spectrum.hpp"

namespace pepscore {

struct ScoredMatch {
  std::string candidate_id;
  double log_score = 0.0;  // log S(T;O), the maximized complete-data loglik
  double mu_hat = 0.0;
  EmissionConfiguration best_config;
  int k = 0;  // emitted-peak count of the best configuration
  int n = 0;  // theoretical peak count
  int m = 0;  // observed peak count
  // Feasibility edges dropped to keep the search within budget (rare).
  std::vector<DroppedEdge> dropped_edges;
};

struct ScoreOptions {
  // Joint configuration counts up to this bound are searched exhaustively
  // (exact max over configurations with mu optimized per configuration);
  // larger instances run the coordinate ascent with frozen shared
  // parameters. The ascent alone can stall on a coordinated move, because
  // the (m-k)!/m! factor and the shared intercept couple components.
  std::uint64_t exact_budget = 512;
  std::uint64_t component_budget = kDefaultComponentBudget;
  std::uint64_t seed = 0;  // drives the ascent's component permutations
  int max_sweeps = 1000;
};

// S(T;O): maximizes the complete-data log-likelihood jointly over the
// emission configuration and the spectrum intercept, with the shared
// parameters frozen. Requires both spectra to match the params charge.
ScoredMatch score(const Spectrum& observed, const Spectrum& theoretical,
                  const GlobalParams& params, const ScoreOptions& options = {});

struct PosteriorEntry {
  std::string candidate_id;
  double posterior = 0.0;
};

// Descending by posterior; ties broken by candidate id.
struct PosteriorSet {
  std::vector<PosteriorEntry> entries;
};

// Softmax of the candidate log scores via log-sum-exp: the probability that
// each candidate generated the observed spectrum, assuming exactly one did
// and all are equally likely a priori.
PosteriorSet posteriors(std::span<const ScoredMatch> scored);

}  // namespace pepscore
