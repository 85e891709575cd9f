// pepscore: likelihood-based peptide-spectrum match scoring.
//
// Subcommands: preprocess, gen-theoretical, train, score, simulate,
// evaluate. Exit codes: 0 success, 1 data/validation error, 2 missing file
// or bad usage.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pepscore/baselines.hpp"
#include "pepscore/evaluate.hpp"
#include "pepscore/io_util.hpp"
#include "pepscore/model.hpp"
#include "pepscore/parallel.hpp"
#include "pepscore/preprocess.hpp"
#include "pepscore/scoring.hpp"
#include "pepscore/simulate.hpp"
#include "pepscore/spectra_io.hpp"
#include "pepscore/training.hpp"

namespace {

using namespace pepscore;

constexpr const char* kNa = "NA";

int default_threads() {
  if (const char* env = std::getenv("PEPSCORE_THREADS")) {
    const auto value = parse_int(env);
    if (value && *value >= 1) return static_cast<int>(*value);
  }
  return 1;
}

std::string resolve_path(const std::filesystem::path& base,
                         const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.string();
  return (base / p).string();
}

std::vector<std::string> non_comment_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    lines.emplace_back(t);
  }
  return lines;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::string in;
  std::string out;
  double tol = 2.0;
};

int run_preprocess(const PreprocessArgs& args) {
  const std::string text = read_file(args.in);
  std::string_view body = trim(text);
  if (body.rfind("BEGIN IONS", 0) == 0) {
    std::vector<Spectrum> spectra = parse_observed(text);
    for (Spectrum& s : spectra) s = preprocess(s, args.tol);
    write_file_atomic(args.out, serialize_observed(spectra));
  } else if (!body.empty() && body.front() == '#') {
    const Spectrum cleaned = preprocess(parse_theoretical(text), args.tol);
    write_file_atomic(args.out, serialize_theoretical(cleaned));
  } else {
    throw std::invalid_argument(
        args.in + ": unrecognized spectrum file (expected an MGF-style "
                  "peak list or a '#'-headed theoretical table)");
  }
  return 0;
}

// ----------------------------------------------------------- gen-theoretical

struct GenTheoreticalArgs {
  std::vector<std::string> sequences;
  std::string sequences_file;
  int charge = 1;
  std::string out;
  std::string out_dir;
};

int run_gen_theoretical(const GenTheoreticalArgs& args) {
  std::vector<std::string> sequences = args.sequences;
  if (!args.sequences_file.empty()) {
    for (const std::string& line :
         non_comment_lines(read_file(args.sequences_file))) {
      sequences.push_back(line);
    }
  }
  if (sequences.empty()) {
    throw std::invalid_argument("no sequences given");
  }
  if (!args.out.empty() && sequences.size() != 1) {
    throw std::invalid_argument(
        "--out takes exactly one sequence; use --out-dir for several");
  }
  if (args.out.empty() && args.out_dir.empty()) {
    throw std::invalid_argument("need --out or --out-dir");
  }
  for (const std::string& seq : sequences) {
    const Spectrum s = generate_naive_theoretical(seq, args.charge);
    const std::string path =
        !args.out.empty()
            ? args.out
            : (std::filesystem::path(args.out_dir) / (seq + ".tsv")).string();
    if (!args.out_dir.empty()) {
      std::filesystem::create_directories(args.out_dir);
    }
    write_file_atomic(path, serialize_theoretical(s));
  }
  return 0;
}

// ----------------------------------------------------------------- manifests

Spectrum load_single_observed(const std::string& path) {
  std::vector<Spectrum> spectra = load_observed_file(path);
  if (spectra.size() != 1) {
    throw std::invalid_argument(path + ": expected exactly one spectrum, got " +
                                std::to_string(spectra.size()));
  }
  return std::move(spectra.front());
}

std::vector<TrainingPair> load_pair_manifest(const std::string& path) {
  const std::filesystem::path base =
      std::filesystem::path(path).parent_path();
  std::vector<TrainingPair> pairs;
  for (const std::string& line : non_comment_lines(read_file(path))) {
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw std::invalid_argument(
          path + ": manifest rows are \"observed<TAB>theoretical\", got \"" +
          line + "\"");
    }
    TrainingPair pair;
    pair.observed =
        load_single_observed(resolve_path(base, std::string(fields[0])));
    pair.theoretical =
        load_theoretical_file(resolve_path(base, std::string(fields[1])));
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// Candidate lists: a directory of .tsv files (shared by every observed
// spectrum) or a manifest of "spectrum_id<TAB>path" rows.
std::map<std::string, std::vector<Spectrum>> load_candidates(
    const std::string& path, const std::vector<Spectrum>& observed) {
  std::map<std::string, std::vector<Spectrum>> by_spectrum;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".tsv") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw std::invalid_argument(path + ": no .tsv candidate files");
    }
    std::vector<Spectrum> shared;
    shared.reserve(files.size());
    for (const std::string& file : files) {
      shared.push_back(load_theoretical_file(file));
    }
    for (const Spectrum& o : observed) by_spectrum[o.id] = shared;
    return by_spectrum;
  }

  const std::filesystem::path base =
      std::filesystem::path(path).parent_path();
  for (const std::string& line : non_comment_lines(read_file(path))) {
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw std::invalid_argument(
          path + ": candidate rows are \"spectrum_id<TAB>path\", got \"" +
          line + "\"");
    }
    by_spectrum[std::string(fields[0])].push_back(
        load_theoretical_file(resolve_path(base, std::string(fields[1]))));
  }
  return by_spectrum;
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
  std::string pairs;
  int charge = 0;
  std::string out;
  std::uint64_t seed = 1;
  int max_iter = 100;
  double tol = 1e-6;
  double window = 2.0;
  double mz_range_length = 0.0;  // 0 = derive from the corpus
  int threads = 1;
};

std::string strip_json_suffix(const std::string& path) {
  const std::string suffix = ".json";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return path.substr(0, path.size() - suffix.size());
  }
  return path;
}

int run_train(const TrainArgs& args) {
  const std::vector<TrainingPair> pairs = load_pair_manifest(args.pairs);
  for (const TrainingPair& p : pairs) {
    if (p.observed.charge != args.charge ||
        p.theoretical.charge != args.charge) {
      throw std::invalid_argument(
          "pair \"" + p.theoretical.id + "\" has charge " +
          std::to_string(p.observed.charge) + ", but --charge is " +
          std::to_string(args.charge));
    }
  }

  FitOptions options;
  options.window = args.window;
  if (args.mz_range_length > 0) {
    options.mz_range_length = args.mz_range_length;
  }
  options.seed = args.seed;
  options.max_outer_iterations = args.max_iter;
  options.relative_tolerance = args.tol;
  options.threads = args.threads;

  const TrainingState state = fit(pairs, options);
  for (const std::string& w : state.warnings) {
    std::cerr << "warning: " << w << "\n";
  }

  save_params_file(state.params, args.out);

  const std::string base = strip_json_suffix(args.out);
  std::ostringstream mu_table;
  mu_table << "id\tmu\tloglik\n";
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    mu_table << pairs[s].observed.id << "\t" << format_double(state.mus[s])
             << "\t" << format_double(state.spectrum_logliks[s]) << "\n";
  }
  write_file_atomic(base + ".mu.tsv", mu_table.str());

  nlohmann::json report;
  report["converged"] = state.converged;
  report["iterations"] = state.iterations;
  report["loglik_trace"] = state.loglik_trace;
  report["seed"] = state.seed;
  report["pairs"] = pairs.size();
  report["charge"] = args.charge;
  report["warnings"] = state.warnings;
  write_file_atomic(base + ".report.json", report.dump(2) + "\n");

  std::cout << "trained " << pairs.size() << " pairs in " << state.iterations
            << " iterations (" << (state.converged ? "converged" : "cap hit")
            << "); params written to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------- score

struct ScoreArgs {
  std::string observed;
  std::string candidates;
  std::string method = "likelihood";
  std::string params;
  std::string out;
  double binwidth = 0.0;  // 0 = per-method default
  std::uint64_t seed = 1;
  int threads = 1;
};

int run_score(const ScoreArgs& args) {
  const std::vector<Spectrum> observed = load_observed_file(args.observed);
  if (observed.empty()) {
    throw std::invalid_argument(args.observed + ": no spectra");
  }
  std::set<std::string> seen_ids;
  for (const Spectrum& o : observed) {
    if (!seen_ids.insert(o.id).second) {
      throw std::invalid_argument(args.observed +
                                  ": duplicate observed spectrum id \"" +
                                  o.id + "\"");
    }
  }
  const auto candidates = load_candidates(args.candidates, observed);
  for (const auto& [id, list] : candidates) {
    std::set<std::string> cand_ids;
    for (const Spectrum& t : list) {
      if (!cand_ids.insert(t.id).second) {
        throw std::invalid_argument("duplicate candidate id \"" + t.id +
                                    "\" for spectrum \"" + id + "\"");
      }
    }
  }

  std::optional<GlobalParams> params;
  if (args.method == "likelihood") {
    if (args.params.empty()) {
      throw std::invalid_argument("--method likelihood needs --params");
    }
    params = load_params_file(args.params);
  }

  struct Job {
    const Spectrum* observed;
    const Spectrum* candidate;
  };
  std::vector<Job> jobs;
  for (const Spectrum& o : observed) {
    const auto it = candidates.find(o.id);
    if (it == candidates.end() || it->second.empty()) {
      throw std::invalid_argument("no candidates for spectrum \"" + o.id +
                                  "\"");
    }
    if (params && o.charge != params->charge) {
      throw std::invalid_argument("spectrum \"" + o.id + "\" has charge " +
                                  std::to_string(o.charge) +
                                  " but the params file is for charge " +
                                  std::to_string(params->charge));
    }
    for (const Spectrum& t : it->second) jobs.push_back(Job{&o, &t});
  }

  const double binwidth =
      args.binwidth > 0 ? args.binwidth
                        : (args.method == "xcorr" ? 1.0 : 2.0);

  std::vector<ScoredMatch> results(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), args.threads, [&](int i) {
    const Job& job = jobs[i];
    if (args.method == "likelihood") {
      ScoreOptions options;
      options.seed = args.seed;
      results[i] = score(*job.observed, *job.candidate, *params, options);
    } else {
      ScoredMatch m;
      m.candidate_id = job.candidate->id;
      m.n = static_cast<int>(job.candidate->size());
      m.m = static_cast<int>(job.observed->size());
      m.log_score = args.method == "similarity"
                        ? similarity_index(*job.observed, *job.candidate,
                                           binwidth)
                        : xcorr(*job.observed, *job.candidate, binwidth);
      results[i] = std::move(m);
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (const DroppedEdge& e : results[i].dropped_edges) {
      std::cerr << "warning: spectrum \"" << jobs[i].observed->id
                << "\" vs \"" << results[i].candidate_id
                << "\": dropped feasibility edge (" << e.theoretical << ", "
                << e.observed << ", |dx| = " << format_double(e.distance)
                << ") to fit the enumeration budget\n";
    }
  }

  std::ostringstream out;
  out << "spectrum_id\tmethod\trank\tcandidate_id\tlog_score\tmu_hat\tk\tn\t"
         "m\tposterior\tflags\n";
  std::size_t offset = 0;
  for (const Spectrum& o : observed) {
    const std::size_t count = candidates.at(o.id).size();
    std::span<const ScoredMatch> block(results.data() + offset, count);
    offset += count;

    std::vector<int> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (block[a].log_score != block[b].log_score) {
        return block[a].log_score > block[b].log_score;
      }
      return block[a].candidate_id < block[b].candidate_id;
    });

    std::map<std::string, double> posterior_by_id;
    if (args.method == "likelihood") {
      for (const PosteriorEntry& e : posteriors(block).entries) {
        posterior_by_id[e.candidate_id] = e.posterior;
      }
    }

    for (std::size_t rank = 0; rank < count; ++rank) {
      const ScoredMatch& m = block[order[rank]];
      out << o.id << "\t" << args.method << "\t" << rank + 1 << "\t"
          << m.candidate_id << "\t" << format_double(m.log_score) << "\t";
      if (args.method == "likelihood") {
        out << format_double(m.mu_hat) << "\t" << m.k << "\t";
      } else {
        out << kNa << "\t" << kNa << "\t";
      }
      out << m.n << "\t" << m.m << "\t";
      if (args.method == "likelihood") {
        out << format_double(posterior_by_id.at(m.candidate_id));
      } else {
        out << kNa;
      }
      out << "\t" << (m.n > m.m ? "n_gt_m" : "-") << "\n";
    }
  }
  write_file_atomic(args.out, out.str());
  std::cout << "scored " << jobs.size() << " candidate pairs over "
            << observed.size() << " spectra; results in " << args.out << "\n";
  return 0;
}

// -------------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string theoretical;  // manifest, directory, or single .tsv
  std::string params;
  int charge = 0;
  double mu = std::numeric_limits<double>::quiet_NaN();
  double noise_frac = 0.9;
  int replicates = 0;
  int corpus_size = 50;
  double mz_lo = 200.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string truth_out;
  std::string pairs_out;
  int max_iter = 100;
  double tol = 1e-6;
  int threads = 1;
};

std::vector<Spectrum> load_theoretical_corpus(const std::string& path) {
  std::vector<Spectrum> corpus;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".tsv") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const std::string& file : files) {
      corpus.push_back(load_theoretical_file(file));
    }
  } else if (path.size() > 4 &&
             path.compare(path.size() - 4, 4, ".tsv") == 0) {
    corpus.push_back(load_theoretical_file(path));
  } else {
    const std::filesystem::path base =
        std::filesystem::path(path).parent_path();
    for (const std::string& line : non_comment_lines(read_file(path))) {
      corpus.push_back(load_theoretical_file(resolve_path(base, line)));
    }
  }
  if (corpus.empty()) {
    throw std::invalid_argument(path + ": no theoretical spectra");
  }
  return corpus;
}

int run_simulate(const SimulateArgs& args) {
  GlobalParams params;
  if (!args.params.empty()) {
    params = load_params_file(args.params);
  } else {
    if (args.charge == 0) {
      throw std::invalid_argument(
          "--charge is required when no --params file is given");
    }
    params = default_simulation_params(args.charge);
  }
  if (args.charge != 0 && args.charge != params.charge) {
    throw std::invalid_argument("--charge disagrees with the params file");
  }
  const double mu =
      std::isnan(args.mu) ? default_simulation_mu(params.charge) : args.mu;

  std::vector<Spectrum> corpus;
  if (!args.theoretical.empty()) {
    corpus = load_theoretical_corpus(args.theoretical);
    for (const Spectrum& t : corpus) {
      if (t.charge != params.charge) {
        throw std::invalid_argument("theoretical spectrum \"" + t.id +
                                    "\" charge differs from the params");
      }
    }
  } else {
    corpus = make_synthetic_corpus(args.corpus_size, params.charge,
                                   substream_seed(args.seed, 0xC0));
  }

  const std::pair<double, double> range{args.mz_lo, args.mz_lo + params.r};

  if (args.replicates > 0) {
    RecoveryOptions options;
    options.replicates = args.replicates;
    options.seed = args.seed;
    options.noise_fraction = args.noise_frac;
    options.mz_range = range;
    options.fit.max_outer_iterations = args.max_iter;
    options.fit.relative_tolerance = args.tol;
    options.fit.threads = args.threads;
    const RecoveryReport report =
        run_recovery_experiment(corpus, params, mu, options);
    write_file_atomic(args.out, serialize_recovery_report(report));
    std::cout << "recovery over " << args.replicates << " replicates x "
              << corpus.size() << " spectra; report in " << args.out << "\n";
    return 0;
  }

  // One observed spectrum per theoretical spectrum.
  std::vector<Spectrum> observed;
  std::ostringstream truth;
  truth << "spectrum_id\ttheoretical_index\tobserved_index\n";
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const Spectrum& T = corpus[s];
    const int noise = static_cast<int>(
        std::floor(args.noise_frac * static_cast<double>(T.size())));
    SimulationTruth sim = sample_observed(T, params, mu, noise, range,
                                          substream_seed(args.seed, s));
    for (std::size_t i = 0; i < sim.true_config.emit_to.size(); ++i) {
      truth << T.id << "\t" << i << "\t" << sim.true_config.emit_to[i]
            << "\n";
    }
    observed.push_back(std::move(sim.observed));
  }
  write_file_atomic(args.out, serialize_observed(observed));
  if (!args.truth_out.empty()) {
    write_file_atomic(args.truth_out, truth.str());
  }
  if (!args.pairs_out.empty()) {
    // Per-pair files plus a manifest, ready for `train --pairs`.
    const std::filesystem::path dir(args.pairs_out);
    std::filesystem::create_directories(dir);
    std::ostringstream manifest;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      const std::string obs_name = corpus[s].id + ".obs.mgf";
      const std::string theo_name = corpus[s].id + ".theo.tsv";
      const std::vector<Spectrum> one{observed[s]};
      write_file_atomic((dir / obs_name).string(), serialize_observed(one));
      write_file_atomic((dir / theo_name).string(),
                        serialize_theoretical(corpus[s]));
      manifest << obs_name << "\t" << theo_name << "\n";
    }
    write_file_atomic((dir / "manifest.tsv").string(), manifest.str());
  }
  std::cout << "simulated " << observed.size() << " spectra into " << args.out
            << "\n";
  return 0;
}

// -------------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string results;
  std::string truth;
  std::string mode = "fdr";
  std::string confidence = "auto";
  std::string thresholds;  // comma-separated; empty = observed values
  int bins = 10;
  std::string out;
};

struct ResultRow {
  std::string spectrum_id;
  std::string method;
  int rank = 0;
  std::string candidate_id;
  double log_score = 0.0;
  std::optional<double> posterior;
};

std::vector<ResultRow> parse_results(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) {
    throw std::invalid_argument(path + ": empty results file");
  }
  const auto columns = split_tabs(header);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    index[std::string(columns[i])] = i;
  }
  for (const char* needed : {"spectrum_id", "method", "rank", "candidate_id",
                             "log_score", "posterior"}) {
    if (!index.count(needed)) {
      throw std::invalid_argument(path + ": missing results column \"" +
                                  needed + "\"");
    }
  }

  std::vector<ResultRow> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < columns.size()) {
      throw std::invalid_argument(path + ": short row on line " +
                                  std::to_string(lineno));
    }
    ResultRow row;
    row.spectrum_id = std::string(fields[index.at("spectrum_id")]);
    row.method = std::string(fields[index.at("method")]);
    row.candidate_id = std::string(fields[index.at("candidate_id")]);
    const auto rank = parse_int(fields[index.at("rank")]);
    const auto log_score = parse_double(fields[index.at("log_score")]);
    if (!rank || !log_score) {
      throw std::invalid_argument(path + ": bad rank/log_score on line " +
                                  std::to_string(lineno));
    }
    row.rank = static_cast<int>(*rank);
    row.log_score = *log_score;
    const std::string_view p = fields[index.at("posterior")];
    if (p != kNa) {
      const auto value = parse_double(p);
      if (!value) {
        throw std::invalid_argument(path + ": bad posterior on line " +
                                    std::to_string(lineno));
      }
      row.posterior = *value;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::invalid_argument(path + ": no result rows");
  }
  return rows;
}

std::map<std::string, std::string> parse_truth(const std::string& path) {
  std::map<std::string, std::string> truth;
  for (const std::string& line : non_comment_lines(read_file(path))) {
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw std::invalid_argument(
          path + ": truth rows are \"spectrum_id<TAB>sequence\", got \"" +
          line + "\"");
    }
    truth[std::string(fields[0])] = std::string(fields[1]);
  }
  return truth;
}

int run_evaluate(const EvaluateArgs& args) {
  const auto rows = parse_results(args.results);
  const auto truth = parse_truth(args.truth);
  const auto truth_of = [&](const std::string& id) -> const std::string& {
    const auto it = truth.find(id);
    if (it == truth.end()) {
      throw std::invalid_argument("no truth entry for spectrum \"" + id +
                                  "\"");
    }
    return it->second;
  };

  // Group rows per spectrum, first-appearance order.
  std::vector<std::string> spectrum_order;
  std::map<std::string, std::vector<const ResultRow*>> groups;
  for (const ResultRow& row : rows) {
    auto [it, inserted] = groups.try_emplace(row.spectrum_id);
    if (inserted) spectrum_order.push_back(row.spectrum_id);
    it->second.push_back(&row);
  }

  if (args.mode == "calibration") {
    std::vector<std::pair<double, bool>> pairs;
    for (const ResultRow& row : rows) {
      if (!row.posterior) {
        throw std::invalid_argument(
            "calibration needs posterior values; spectrum \"" +
            row.spectrum_id + "\" has none (score with --method likelihood)");
      }
      pairs.push_back(
          {*row.posterior,
           is_correct(row.candidate_id, truth_of(row.spectrum_id))});
    }
    const auto table = calibration_bins(pairs, args.bins);
    std::ostringstream out;
    out << "bin_lo\tbin_hi\tcount\tmean_assigned\tempirical_correct\n";
    for (const CalibrationRow& row : table) {
      out << format_double(row.lo) << "\t" << format_double(row.hi) << "\t"
          << row.count << "\t"
          << (row.mean_assigned ? format_double(*row.mean_assigned) : kNa)
          << "\t"
          << (row.correct_fraction ? format_double(*row.correct_fraction)
                                   : kNa)
          << "\n";
    }
    write_file_atomic(args.out, out.str());
    std::cout << "calibration over " << pairs.size() << " candidates in "
              << args.out << "\n";
    return 0;
  }

  if (args.mode != "fdr") {
    throw std::invalid_argument("unknown --mode \"" + args.mode + "\"");
  }

  std::vector<IdentificationRecord> records;
  for (const std::string& id : spectrum_order) {
    auto& group = groups.at(id);
    std::sort(group.begin(), group.end(),
              [](const ResultRow* a, const ResultRow* b) {
                return a->rank < b->rank;
              });
    const ResultRow& top = *group.front();

    std::string rule = args.confidence;
    if (rule == "auto") {
      rule = top.method == "likelihood" ? "posterior" : "gap";
    }
    std::vector<double> scores;
    scores.reserve(group.size());
    for (const ResultRow* row : group) scores.push_back(row->log_score);

    double confidence;
    if (rule == "posterior") {
      if (!top.posterior) {
        throw std::invalid_argument("spectrum \"" + id +
                                    "\" has no posterior column value");
      }
      confidence = *top.posterior;
    } else if (rule == "gap") {
      confidence = confidence_gap(scores);
    } else if (rule == "deltacn") {
      const auto value = delta_cn(scores);
      if (!value) {
        std::cerr << "warning: delta-cn undefined for spectrum \"" << id
                  << "\" (best score <= 0); treated as never determined\n";
        confidence = -std::numeric_limits<double>::infinity();
      } else {
        confidence = *value;
      }
    } else {
      throw std::invalid_argument("unknown --confidence \"" + rule + "\"");
    }
    records.push_back(
        {confidence, is_correct(top.candidate_id, truth_of(id))});
  }

  std::vector<double> thresholds;
  if (!args.thresholds.empty()) {
    std::istringstream in(args.thresholds);
    std::string token;
    while (std::getline(in, token, ',')) {
      const auto value = parse_double(trim(token));
      if (!value) {
        throw std::invalid_argument("bad threshold \"" + token + "\"");
      }
      thresholds.push_back(*value);
    }
  } else {
    std::set<double> unique;
    for (const auto& rec : records) unique.insert(rec.confidence);
    thresholds.assign(unique.begin(), unique.end());
  }

  const auto curve = fdr_vs_undetermined(records, thresholds);
  std::ostringstream out;
  out << "threshold\tundetermined_rate\tfdr\n";
  for (const FdrRow& row : curve) {
    out << format_double(row.threshold) << "\t"
        << format_double(row.undetermined_rate) << "\t"
        << (row.fdr ? format_double(*row.fdr) : kNa) << "\n";
  }
  write_file_atomic(args.out, out.str());
  std::cout << "fdr curve over " << records.size() << " spectra in "
            << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"likelihood-based peptide-spectrum match scoring"};
  app.require_subcommand(1);
  const int threads = default_threads();

  PreprocessArgs pre;
  auto* cmd_pre = app.add_subcommand(
      "preprocess", "cluster, normalize and stabilize a spectrum file");
  cmd_pre->add_option("--in", pre.in, "input spectrum file")->required();
  cmd_pre->add_option("--out", pre.out, "output file")->required();
  cmd_pre->add_option("--tol", pre.tol, "clustering tolerance in Da")
      ->check(CLI::PositiveNumber);

  GenTheoreticalArgs gen;
  auto* cmd_gen = app.add_subcommand(
      "gen-theoretical",
      "naive singly-charged b/y ladder for a peptide sequence");
  cmd_gen->add_option("--sequence", gen.sequences, "peptide sequence");
  cmd_gen->add_option("--sequences", gen.sequences_file,
                      "file with one sequence per line");
  cmd_gen->add_option("--charge", gen.charge, "charge state")
      ->check(CLI::PositiveNumber);
  cmd_gen->add_option("--out", gen.out, "output .tsv (single sequence)");
  cmd_gen->add_option("--out-dir", gen.out_dir, "output directory");

  TrainArgs train_args;
  train_args.threads = threads;
  auto* cmd_train = app.add_subcommand(
      "train", "estimate shared parameters from observed/theoretical pairs");
  cmd_train->add_option("--pairs", train_args.pairs,
                        "manifest of observed<TAB>theoretical paths")
      ->required();
  cmd_train->add_option("--charge", train_args.charge, "charge state")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--out", train_args.out, "params JSON path")
      ->required();
  cmd_train->add_option("--seed", train_args.seed, "RNG seed");
  cmd_train->add_option("--max-iter", train_args.max_iter,
                        "outer iteration cap")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--tol", train_args.tol,
                        "relative convergence tolerance")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--window", train_args.window,
                        "match window w in Da")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--mz-range-length", train_args.mz_range_length,
                        "observable m/z range length r (default: corpus span)");
  cmd_train->add_option("--threads", train_args.threads, "worker threads")
      ->check(CLI::PositiveNumber);

  ScoreArgs score_args;
  score_args.threads = threads;
  auto* cmd_score = app.add_subcommand(
      "score", "rank candidate theoretical spectra per observed spectrum");
  cmd_score->add_option("--observed", score_args.observed,
                        "observed spectra (MGF-style)")
      ->required();
  cmd_score->add_option("--candidates", score_args.candidates,
                        "candidate dir or spectrum_id<TAB>path manifest")
      ->required();
  cmd_score
      ->add_option("--method", score_args.method,
                   "likelihood | similarity | xcorr")
      ->check(CLI::IsMember({"likelihood", "similarity", "xcorr"}));
  cmd_score->add_option("--params", score_args.params,
                        "params JSON (likelihood only)");
  cmd_score->add_option("--out", score_args.out, "output TSV")->required();
  cmd_score->add_option("--binwidth", score_args.binwidth,
                        "baseline binning width in Da");
  cmd_score->add_option("--seed", score_args.seed,
                        "seed for the configuration search");
  cmd_score->add_option("--threads", score_args.threads, "worker threads")
      ->check(CLI::PositiveNumber);

  SimulateArgs sim;
  sim.threads = threads;
  auto* cmd_sim = app.add_subcommand(
      "simulate",
      "draw observed spectra from the generative model; with --replicates, "
      "run the parameter-recovery experiment");
  cmd_sim->add_option("--theoretical", sim.theoretical,
                      "theoretical corpus (dir, manifest, or .tsv); "
                      "default: synthetic corpus");
  cmd_sim->add_option("--params", sim.params,
                      "true params JSON (default: built-in per charge)");
  cmd_sim->add_option("--charge", sim.charge, "charge state");
  cmd_sim->add_option("--mu", sim.mu, "true spectrum intercept");
  cmd_sim->add_option("--noise-frac", sim.noise_frac,
                      "noise peaks per theoretical peak");
  cmd_sim->add_option("--replicates", sim.replicates,
                      "recovery-experiment replicates (0 = just simulate)");
  cmd_sim->add_option("--corpus-size", sim.corpus_size,
                      "synthetic corpus size")
      ->check(CLI::PositiveNumber);
  cmd_sim->add_option("--mz-lo", sim.mz_lo, "lower end of the m/z range");
  cmd_sim->add_option("--seed", sim.seed, "RNG seed");
  cmd_sim->add_option("--out", sim.out, "output path")->required();
  cmd_sim->add_option("--truth-out", sim.truth_out,
                      "emission-truth TSV (simulation mode)");
  cmd_sim->add_option("--pairs-out", sim.pairs_out,
                      "directory for per-pair files plus a train manifest");
  cmd_sim->add_option("--max-iter", sim.max_iter, "fit iteration cap");
  cmd_sim->add_option("--tol", sim.tol, "fit convergence tolerance");
  cmd_sim->add_option("--threads", sim.threads, "worker threads")
      ->check(CLI::PositiveNumber);

  EvaluateArgs eval;
  auto* cmd_eval = app.add_subcommand(
      "evaluate", "FDR/undetermined curves and posterior calibration");
  cmd_eval->add_option("--results", eval.results, "scoring TSV")->required();
  cmd_eval->add_option("--truth", eval.truth,
                       "spectrum_id<TAB>sequence table")
      ->required();
  cmd_eval->add_option("--mode", eval.mode, "fdr | calibration")
      ->check(CLI::IsMember({"fdr", "calibration"}));
  cmd_eval
      ->add_option("--confidence", eval.confidence,
                   "auto | posterior | gap | deltacn")
      ->check(CLI::IsMember({"auto", "posterior", "gap", "deltacn"}));
  cmd_eval->add_option("--thresholds", eval.thresholds,
                       "comma-separated thresholds (default: observed)");
  cmd_eval->add_option("--bins", eval.bins, "calibration bin count")
      ->check(CLI::PositiveNumber);
  cmd_eval->add_option("--out", eval.out, "output TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_pre->parsed()) return run_preprocess(pre);
    if (cmd_gen->parsed()) return run_gen_theoretical(gen);
    if (cmd_train->parsed()) return run_train(train_args);
    if (cmd_score->parsed()) return run_score(score_args);
    if (cmd_sim->parsed()) return run_simulate(sim);
    if (cmd_eval->parsed()) return run_evaluate(eval);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
