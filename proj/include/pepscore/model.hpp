#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pepscore/densities.hpp"
#include "pepscore/spectrum.hpp"

namespace pepscore {

// Parameters shared across spectra of one charge state: location-noise
// scale sigma, logistic slope beta, the noise (f0) and emitted-peak (f1)
// intensity densities over shared bin edges, plus the fixed constants
// w (match window) and r (length of the observable m/z range).
struct GlobalParams {
  double sigma = 0.0;
  double beta = 0.0;
  double w = 2.0;
  double r = 0.0;
  int charge = 0;
  PiecewiseDensity f0;
  PiecewiseDensity f1;

  void validate() const;  // throws std::invalid_argument
};

// Versioned JSON text document.
std::string serialize_params(const GlobalParams& params);
GlobalParams parse_params(std::string_view text);
GlobalParams load_params_file(const std::string& path);
void save_params_file(const GlobalParams& params, const std::string& path);

inline constexpr int kNoEmission = -1;

// Which observed peak each theoretical peak emitted: emit_to[i] is an
// observed index, or kNoEmission. Nonnegative entries must be pairwise
// distinct and within the +-w window of their theoretical peak.
struct EmissionConfiguration {
  std::vector<int> emit_to;

  int emitted_count() const {
    int k = 0;
    for (int j : emit_to) k += (j != kNoEmission);
    return k;
  }
};

bool is_feasible(const EmissionConfiguration& e, const Spectrum& theoretical,
                 const Spectrum& observed, double w);

// A connected component of the bipartite "within w" graph between
// theoretical and observed peaks. Theoretical peaks with no observed peak
// in range form singleton components with an empty observed set. The
// component owns its feasibility edges: after a budget fallback they can be
// a strict subset of the within-w pairs.
struct Component {
  std::vector<int> theoretical;  // ascending theoretical indices
  std::vector<int> observed;     // ascending observed indices
  // edges[p]: feasible observed indices for theoretical[p]
  std::vector<std::vector<int>> edges;
};

struct DroppedEdge {
  int theoretical = 0;
  int observed = 0;
  double distance = 0.0;
};

struct ComponentPartition {
  std::vector<Component> components;
  // Feasibility edges removed (largest |dx| first) to keep every
  // component's configuration count within the enumeration budget.
  std::vector<DroppedEdge> dropped_edges;
};

class EnumerationOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultComponentBudget = 1000000;

ComponentPartition build_components(
    const Spectrum& theoretical, const Spectrum& observed, double w,
    std::uint64_t config_budget = kDefaultComponentBudget);

// Number of injective partial maps of the component's theoretical peaks
// into its observed peaks (counting stops at cap+1).
std::uint64_t count_component_configurations(const Component& c,
                                             std::uint64_t cap);

// All injective partial maps over the component's edges, the empty map
// included. Entry order matches c.theoretical; values are observed indices
// or kNoEmission. Throws EnumerationOverflow past the budget.
std::vector<std::vector<int>> enumerate_component_configurations(
    const Component& c, std::uint64_t budget = kDefaultComponentBudget);

// Log of p(O|T,e) * p(e|T):
//   log[(m-k)!/m!] + sum_{emitting i} log g(y_i) + sum_{silent i} log(1-g)
//   + (m-k) log(1/r) + sum_{noise j} log f0(y_j)
//   + sum_{emitted (i,j)} [trunc-normal logpdf(x_j; x_i) + log f1(y_j)].
// Throws on an infeasible configuration.
double complete_data_loglik(const Spectrum& observed,
                            const Spectrum& theoretical,
                            const EmissionConfiguration& e,
                            const GlobalParams& params, double mu);

// log p(O|T): stable log-sum-exp over every configuration in the full
// cross-product of component configuration sets. The global (m-k)!/m!
// factor couples components, so the cross-product is walked explicitly.
// Exactness oracle for small instances only; throws past the budget.
double full_loglik_bruteforce(const Spectrum& observed,
                              const Spectrum& theoretical,
                              const GlobalParams& params, double mu,
                              std::uint64_t budget = 100000);

}  // namespace pepscore
