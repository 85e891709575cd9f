#include "pepscore/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "pepscore/rng.hpp"
#include "pepscore/training.hpp"

namespace pepscore {

namespace {

struct SearchContext {
  const Spectrum& observed;
  const Spectrum& theoretical;
  const GlobalParams& params;
  ComponentPartition partition;
  std::vector<std::vector<std::vector<int>>> candidates;
  std::vector<double> theo_intensities;

  double evaluate(const EmissionConfiguration& e, std::vector<char>& labels,
                  double* mu_out) const {
    for (std::size_t i = 0; i < theoretical.size(); ++i) {
      labels[i] = e.emit_to[i] != kNoEmission;
    }
    const double mu = optimize_mu(theo_intensities, labels, params.beta);
    *mu_out = mu;
    return complete_data_loglik(observed, theoretical, e, params, mu);
  }
};

// Exhaustive max over the cross-product of component configurations, with
// the intercept optimized exactly per configuration.
void search_exact(const SearchContext& ctx, EmissionConfiguration& best,
                  double& best_val, double& best_mu) {
  std::vector<std::size_t> idx(ctx.partition.components.size(), 0);
  EmissionConfiguration e;
  e.emit_to.assign(ctx.theoretical.size(), kNoEmission);
  std::vector<char> labels(ctx.theoretical.size(), 0);
  bool first = true;
  for (;;) {
    for (std::size_t g = 0; g < ctx.partition.components.size(); ++g) {
      const Component& c = ctx.partition.components[g];
      const auto& cfg = ctx.candidates[g][idx[g]];
      for (std::size_t p = 0; p < c.theoretical.size(); ++p) {
        e.emit_to[c.theoretical[p]] = cfg[p];
      }
    }
    double mu = 0.0;
    const double val = ctx.evaluate(e, labels, &mu);
    if (first || val > best_val) {
      best = e;
      best_val = val;
      best_mu = mu;
      first = false;
    }

    std::size_t g = 0;
    for (; g < idx.size(); ++g) {
      if (++idx[g] < ctx.candidates[g].size()) break;
      idx[g] = 0;
    }
    if (g == idx.size()) break;
  }
}

// Component-wise coordinate ascent from the greedy nearest-pair start,
// re-optimizing mu for every candidate configuration; sweeps in random
// component order until a full sweep accepts nothing.
void search_ascent(const SearchContext& ctx, const ScoreOptions& options,
                   EmissionConfiguration& best, double& best_val,
                   double& best_mu) {
  best = init_configuration(ctx.partition, ctx.theoretical, ctx.observed,
                            ctx.params.w);
  std::vector<char> labels(ctx.theoretical.size(), 0);
  best_val = ctx.evaluate(best, labels, &best_mu);

  const std::uint64_t stream =
      fnv1a64(ctx.theoretical.id, fnv1a64(ctx.observed.id));
  Rng rng(substream_seed(options.seed, stream));

  const int n_components = static_cast<int>(ctx.partition.components.size());
  std::vector<int> order(n_components);
  for (int g = 0; g < n_components; ++g) order[g] = g;

  EmissionConfiguration trial;
  int sweeps = 0;
  bool changed = true;
  while (changed && sweeps++ < options.max_sweeps) {
    changed = false;
    rng.shuffle(order);
    for (int g : order) {
      const Component& comp = ctx.partition.components[g];
      double local_best = best_val;
      double local_mu = best_mu;
      const std::vector<int>* local_cfg = nullptr;
      for (const auto& cfg : ctx.candidates[g]) {
        trial = best;
        for (std::size_t p = 0; p < comp.theoretical.size(); ++p) {
          trial.emit_to[comp.theoretical[p]] = cfg[p];
        }
        double mu = 0.0;
        const double val = ctx.evaluate(trial, labels, &mu);
        if (val > local_best) {
          local_best = val;
          local_mu = mu;
          local_cfg = &cfg;
        }
      }
      if (local_cfg != nullptr) {
        for (std::size_t p = 0; p < comp.theoretical.size(); ++p) {
          best.emit_to[comp.theoretical[p]] = (*local_cfg)[p];
        }
        best_val = local_best;
        best_mu = local_mu;
        changed = true;
      }
    }
  }
}

}  // namespace

ScoredMatch score(const Spectrum& observed, const Spectrum& theoretical,
                  const GlobalParams& params, const ScoreOptions& options) {
  params.validate();
  if (observed.empty() || theoretical.empty()) {
    throw std::invalid_argument("score: spectra must be nonempty");
  }
  if (observed.charge != params.charge ||
      theoretical.charge != params.charge) {
    throw std::invalid_argument(
        "score: charge mismatch (params trained for charge " +
        std::to_string(params.charge) + ", got observed " +
        std::to_string(observed.charge) + ", theoretical " +
        std::to_string(theoretical.charge) + ")");
  }

  SearchContext ctx{observed, theoretical, params, {}, {}, {}};
  ctx.partition = build_components(theoretical, observed, params.w,
                                   options.component_budget);
  std::uint64_t joint = 1;
  bool exact = true;
  for (const Component& c : ctx.partition.components) {
    ctx.candidates.push_back(
        enumerate_component_configurations(c, options.component_budget));
    const std::uint64_t size = ctx.candidates.back().size();
    if (joint > options.exact_budget / size) {
      exact = false;
      joint = options.exact_budget + 1;
    } else {
      joint *= size;
    }
  }
  for (const Peak& p : theoretical.peaks) {
    ctx.theo_intensities.push_back(p.intensity);
  }

  ScoredMatch match;
  match.candidate_id = theoretical.id;
  match.n = static_cast<int>(theoretical.size());
  match.m = static_cast<int>(observed.size());
  match.dropped_edges = ctx.partition.dropped_edges;
  if (exact && joint <= options.exact_budget) {
    search_exact(ctx, match.best_config, match.log_score, match.mu_hat);
  } else {
    search_ascent(ctx, options, match.best_config, match.log_score,
                  match.mu_hat);
  }
  match.k = match.best_config.emitted_count();
  return match;
}

PosteriorSet posteriors(std::span<const ScoredMatch> scored) {
  if (scored.empty()) {
    throw std::invalid_argument("posteriors: need at least one candidate");
  }
  double peak = scored[0].log_score;
  for (const ScoredMatch& s : scored) peak = std::max(peak, s.log_score);

  std::vector<double> weights;
  weights.reserve(scored.size());
  double total = 0.0;
  for (const ScoredMatch& s : scored) {
    weights.push_back(std::exp(s.log_score - peak));
    total += weights.back();
  }

  PosteriorSet out;
  out.entries.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    out.entries.push_back(
        PosteriorEntry{scored[i].candidate_id, weights[i] / total});
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const PosteriorEntry& a, const PosteriorEntry& b) {
              if (a.posterior != b.posterior) return a.posterior > b.posterior;
              return a.candidate_id < b.candidate_id;
            });
  return out;
}

}  // namespace pepscore
