#include "pepscore/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "json.hpp"
#include "pepscore/io_util.hpp"

namespace pepscore {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kParamsFormatVersion = 1;
}  // namespace

void GlobalParams::validate() const {
  if (!(sigma > 0)) throw std::invalid_argument("params: sigma must be > 0");
  if (!std::isfinite(beta)) {
    throw std::invalid_argument("params: beta must be finite");
  }
  if (!(w > 0)) throw std::invalid_argument("params: w must be > 0");
  if (!(r > 0)) throw std::invalid_argument("params: r must be > 0");
  if (charge < 1) throw std::invalid_argument("params: charge must be >= 1");
  f0.validate();
  f1.validate();
  for (int b = 0; b <= PiecewiseDensity::kBins; ++b) {
    if (f0.edges[b] != f1.edges[b]) {
      throw std::invalid_argument("params: f0 and f1 must share bin edges");
    }
  }
}

std::string serialize_params(const GlobalParams& params) {
  nlohmann::json j;
  j["format"] = "pepscore-params";
  j["version"] = kParamsFormatVersion;
  j["charge"] = params.charge;
  j["sigma"] = params.sigma;
  j["beta"] = params.beta;
  j["window"] = params.w;
  j["mz_range_length"] = params.r;
  j["intensity_bin_edges"] = params.f0.edges;
  j["f0_masses"] = params.f0.masses;
  j["f1_masses"] = params.f1.masses;
  return j.dump(2) + "\n";
}

GlobalParams parse_params(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("params document: ") + e.what());
  }
  try {
    if (j.at("format") != "pepscore-params") {
      throw std::invalid_argument("params document: unknown format field");
    }
    if (j.at("version") != kParamsFormatVersion) {
      throw std::invalid_argument("params document: unsupported version");
    }
    GlobalParams p;
    p.charge = j.at("charge").get<int>();
    p.sigma = j.at("sigma").get<double>();
    p.beta = j.at("beta").get<double>();
    p.w = j.at("window").get<double>();
    p.r = j.at("mz_range_length").get<double>();
    p.f0.edges = j.at("intensity_bin_edges").get<std::array<double, 11>>();
    p.f1.edges = p.f0.edges;
    p.f0.masses = j.at("f0_masses").get<std::array<double, 10>>();
    p.f1.masses = j.at("f1_masses").get<std::array<double, 10>>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("params document: ") + e.what());
  }
}

GlobalParams load_params_file(const std::string& path) {
  try {
    return parse_params(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void save_params_file(const GlobalParams& params, const std::string& path) {
  write_file_atomic(path, serialize_params(params));
}

bool is_feasible(const EmissionConfiguration& e, const Spectrum& theoretical,
                 const Spectrum& observed, double w) {
  const int n = static_cast<int>(theoretical.size());
  const int m = static_cast<int>(observed.size());
  if (static_cast<int>(e.emit_to.size()) != n) return false;
  std::vector<char> used(m, 0);
  for (int i = 0; i < n; ++i) {
    const int j = e.emit_to[i];
    if (j == kNoEmission) continue;
    if (j < 0 || j >= m) return false;
    if (used[j]) return false;
    used[j] = 1;
    if (std::abs(theoretical.peaks[i].mz - observed.peaks[j].mz) > w) {
      return false;
    }
  }
  return true;
}

namespace {

// Feasible observed peaks per theoretical peak; sorted spectra let a
// two-pointer sweep do it in linear time.
std::vector<std::vector<int>> feasibility_edges(const Spectrum& theoretical,
                                                const Spectrum& observed,
                                                double w) {
  const int n = static_cast<int>(theoretical.size());
  const int m = static_cast<int>(observed.size());
  std::vector<std::vector<int>> adj(n);
  int lo = 0;
  for (int i = 0; i < n; ++i) {
    const double x = theoretical.peaks[i].mz;
    while (lo < m && observed.peaks[lo].mz < x - w) ++lo;
    for (int j = lo; j < m && observed.peaks[j].mz <= x + w; ++j) {
      adj[i].push_back(j);
    }
  }
  return adj;
}

// Connected components over the bipartite graph given by `adj`,
// restricted to the theoretical peaks in `seed` (empty = all).
std::vector<Component> connected_components(
    const std::vector<std::vector<int>>& adj, int m,
    const std::vector<int>& seed) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> theo_pool = seed;
  if (theo_pool.empty()) {
    theo_pool.resize(n);
    for (int i = 0; i < n; ++i) theo_pool[i] = i;
  }
  std::vector<char> in_pool(n, 0);
  for (int i : theo_pool) in_pool[i] = 1;

  // Observed-side adjacency restricted to the pool.
  std::vector<std::vector<int>> obs_adj(m);
  for (int i : theo_pool) {
    for (int j : adj[i]) obs_adj[j].push_back(i);
  }

  std::vector<char> theo_seen(n, 0), obs_seen(m, 0);
  std::vector<Component> out;
  for (int start : theo_pool) {
    if (theo_seen[start]) continue;
    Component c;
    std::deque<std::pair<char, int>> queue;  // ('t', i) or ('o', j)
    queue.emplace_back('t', start);
    theo_seen[start] = 1;
    while (!queue.empty()) {
      auto [side, idx] = queue.front();
      queue.pop_front();
      if (side == 't') {
        c.theoretical.push_back(idx);
        for (int j : adj[idx]) {
          if (!obs_seen[j]) {
            obs_seen[j] = 1;
            queue.emplace_back('o', j);
          }
        }
      } else {
        c.observed.push_back(idx);
        for (int i : obs_adj[idx]) {
          if (in_pool[i] && !theo_seen[i]) {
            theo_seen[i] = 1;
            queue.emplace_back('t', i);
          }
        }
      }
    }
    std::sort(c.theoretical.begin(), c.theoretical.end());
    std::sort(c.observed.begin(), c.observed.end());
    for (int i : c.theoretical) c.edges.push_back(adj[i]);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

ComponentPartition build_components(const Spectrum& theoretical,
                                    const Spectrum& observed, double w,
                                    std::uint64_t config_budget) {
  if (!(w > 0)) throw std::invalid_argument("window w must be positive");
  const int m = static_cast<int>(observed.size());
  auto adj = feasibility_edges(theoretical, observed, w);

  ComponentPartition partition;
  std::deque<Component> worklist;
  for (Component& c : connected_components(adj, m, {})) {
    worklist.push_back(std::move(c));
  }

  while (!worklist.empty()) {
    Component c = std::move(worklist.front());
    worklist.pop_front();
    if (count_component_configurations(c, config_budget) <= config_budget) {
      partition.components.push_back(std::move(c));
      continue;
    }
    // Over budget: drop the weakest feasibility edge (largest |dx|; ties by
    // lowest theoretical then observed index) and re-split.
    DroppedEdge worst{-1, -1, -1.0};
    for (int i : c.theoretical) {
      for (int j : adj[i]) {
        const double d =
            std::abs(theoretical.peaks[i].mz - observed.peaks[j].mz);
        if (d > worst.distance) worst = DroppedEdge{i, j, d};
      }
    }
    auto& edges = adj[worst.theoretical];
    edges.erase(std::find(edges.begin(), edges.end(), worst.observed));
    partition.dropped_edges.push_back(worst);
    for (Component& piece : connected_components(adj, m, c.theoretical)) {
      worklist.push_back(std::move(piece));
    }
  }

  std::sort(partition.components.begin(), partition.components.end(),
            [](const Component& a, const Component& b) {
              return a.theoretical.front() < b.theoretical.front();
            });
  return partition;
}

namespace {

int component_used_size(const Component& c) {
  int max_obs = 0;
  for (const auto& list : c.edges) {
    for (int j : list) max_obs = std::max(max_obs, j + 1);
  }
  return max_obs;
}

}  // namespace

std::uint64_t count_component_configurations(const Component& c,
                                             std::uint64_t cap) {
  const int size = static_cast<int>(c.theoretical.size());
  if (c.edges.size() != c.theoretical.size()) {
    throw std::invalid_argument("component edge lists out of shape");
  }
  std::vector<char> used(component_used_size(c), 0);
  std::uint64_t count = 0;
  bool over = false;
  auto rec = [&](auto&& self, int pos) -> void {
    if (over) return;
    if (pos == size) {
      if (++count > cap) over = true;
      return;
    }
    self(self, pos + 1);  // no emission
    for (int j : c.edges[pos]) {
      if (used[j]) continue;
      used[j] = 1;
      self(self, pos + 1);
      used[j] = 0;
      if (over) return;
    }
  };
  rec(rec, 0);
  return over ? cap + 1 : count;
}

std::vector<std::vector<int>> enumerate_component_configurations(
    const Component& c, std::uint64_t budget) {
  const int size = static_cast<int>(c.theoretical.size());
  if (c.edges.size() != c.theoretical.size()) {
    throw std::invalid_argument("component edge lists out of shape");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> current(size, kNoEmission);
  std::vector<char> used(component_used_size(c), 0);
  auto rec = [&](auto&& self, int pos) -> void {
    if (pos == size) {
      if (out.size() + 1 > budget) {
        throw EnumerationOverflow(
            "component with " + std::to_string(c.theoretical.size()) +
            " theoretical and " + std::to_string(c.observed.size()) +
            " observed peaks exceeds the enumeration budget of " +
            std::to_string(budget));
      }
      out.push_back(current);
      return;
    }
    current[pos] = kNoEmission;
    self(self, pos + 1);
    for (int j : c.edges[pos]) {
      if (used[j]) continue;
      used[j] = 1;
      current[pos] = j;
      self(self, pos + 1);
      used[j] = 0;
    }
    current[pos] = kNoEmission;
  };
  rec(rec, 0);
  return out;
}

double complete_data_loglik(const Spectrum& observed,
                            const Spectrum& theoretical,
                            const EmissionConfiguration& e,
                            const GlobalParams& params, double mu) {
  const int n = static_cast<int>(theoretical.size());
  const int m = static_cast<int>(observed.size());
  if (n == 0 || m == 0) {
    throw std::invalid_argument("complete_data_loglik: empty spectrum");
  }
  if (!is_feasible(e, theoretical, observed, params.w)) {
    throw std::invalid_argument(
        "complete_data_loglik: infeasible emission configuration for pair (" +
        theoretical.id + ", " + observed.id + ")");
  }

  std::vector<int> source(m, kNoEmission);  // e^o: observed -> theoretical
  int k = 0;
  for (int i = 0; i < n; ++i) {
    const int j = e.emit_to[i];
    if (j != kNoEmission) {
      source[j] = i;
      ++k;
    }
  }

  double ll = std::lgamma(static_cast<double>(m - k) + 1.0) -
              std::lgamma(static_cast<double>(m) + 1.0);
  ll -= static_cast<double>(m - k) * std::log(params.r);

  for (int i = 0; i < n; ++i) {
    const double t = mu + params.beta * theoretical.peaks[i].intensity;
    ll += e.emit_to[i] != kNoEmission ? log_sigmoid(t) : log_sigmoid(-t);
  }

  for (int j = 0; j < m; ++j) {
    const Peak& o = observed.peaks[j];
    if (source[j] == kNoEmission) {
      ll += params.f0.logpdf(o.intensity);
    } else {
      ll += truncated_normal_logpdf(o.mz, theoretical.peaks[source[j]].mz,
                                    params.sigma, params.w);
      ll += params.f1.logpdf(o.intensity);
    }
  }
  return ll;
}

double full_loglik_bruteforce(const Spectrum& observed,
                              const Spectrum& theoretical,
                              const GlobalParams& params, double mu,
                              std::uint64_t budget) {
  const auto partition =
      build_components(theoretical, observed, params.w, budget);
  std::vector<std::vector<std::vector<int>>> candidates;
  std::uint64_t total = 1;
  for (const Component& c : partition.components) {
    candidates.push_back(enumerate_component_configurations(c, budget));
    const std::uint64_t size = candidates.back().size();
    if (total > budget / size) {
      throw EnumerationOverflow(
          "total configuration count exceeds the brute-force budget of " +
          std::to_string(budget));
    }
    total *= size;
  }

  // Walk the cross-product with an odometer and log-sum-exp the terms.
  std::vector<std::size_t> idx(partition.components.size(), 0);
  std::vector<double> values;
  values.reserve(total);
  EmissionConfiguration e;
  e.emit_to.assign(theoretical.size(), kNoEmission);
  for (;;) {
    for (std::size_t g = 0; g < partition.components.size(); ++g) {
      const Component& c = partition.components[g];
      const auto& cfg = candidates[g][idx[g]];
      for (std::size_t p = 0; p < c.theoretical.size(); ++p) {
        e.emit_to[c.theoretical[p]] = cfg[p];
      }
    }
    values.push_back(complete_data_loglik(observed, theoretical, e, params, mu));

    std::size_t g = 0;
    for (; g < idx.size(); ++g) {
      if (++idx[g] < candidates[g].size()) break;
      idx[g] = 0;
    }
    if (g == idx.size()) break;
  }

  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace pepscore
