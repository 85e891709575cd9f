#include "pepscore/spectra_io.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

#include "pepscore/io_util.hpp"

namespace pepscore {

namespace {

// Splits text into lines, tolerating trailing CR and a missing final newline.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

struct PeakLine {
  Peak peak;
  int line;
};

// Parses "<mz> <intensity>" and validates the peak invariants.
Peak parse_peak_line(std::string_view line, int lineno,
                     const std::string& where) {
  auto fields = split_fields(line);
  if (fields.size() != 2) {
    throw ParseError(where + ": expected \"mz intensity\", got \"" +
                         std::string(line) + "\"",
                     lineno);
  }
  auto mz = parse_double(fields[0]);
  auto intensity = parse_double(fields[1]);
  if (!mz || !intensity) {
    throw ParseError(where + ": non-numeric peak line \"" +
                         std::string(line) + "\"",
                     lineno);
  }
  if (!(*mz > 0)) {
    throw ParseError(where + ": m/z must be positive, got " +
                         std::string(fields[0]),
                     lineno);
  }
  if (!(*intensity >= 0)) {
    throw ParseError(where + ": intensity must be nonnegative, got " +
                         std::string(fields[1]),
                     lineno);
  }
  return Peak{*mz, *intensity};
}

void check_duplicate_mz(std::map<double, int>& seen, const Peak& p,
                        int lineno, const std::string& where) {
  auto [it, inserted] = seen.emplace(p.mz, lineno);
  if (!inserted) {
    throw ParseError(where + ": duplicate m/z " + format_double(p.mz) +
                         " (first seen on line " +
                         std::to_string(it->second) + ")",
                     lineno);
  }
}

}  // namespace

std::vector<Spectrum> parse_observed(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<Spectrum> spectra;

  bool in_block = false;
  int block_ordinal = 0;
  int block_line = 0;
  std::string title;
  int charge = 0;
  std::optional<double> pepmass;
  std::vector<Peak> peaks;
  std::map<double, int> seen_mz;
  bool peaks_started = false;

  auto block_name = [&]() {
    std::string name = "block " + std::to_string(block_ordinal);
    if (!title.empty()) name += " (TITLE=" + title + ")";
    return name;
  };

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int lineno = static_cast<int>(li) + 1;
    std::string_view line = trim(lines[li]);
    if (line.empty()) continue;

    if (!in_block) {
      if (line == "BEGIN IONS") {
        in_block = true;
        ++block_ordinal;
        block_line = lineno;
        title.clear();
        charge = 0;
        pepmass.reset();
        peaks.clear();
        seen_mz.clear();
        peaks_started = false;
      } else {
        throw ParseError("expected BEGIN IONS, got \"" + std::string(line) +
                             "\"",
                         lineno);
      }
      continue;
    }

    if (line == "END IONS") {
      if (title.empty()) {
        throw ParseError(block_name() + ": missing TITLE header", lineno);
      }
      if (charge == 0) {
        throw ParseError(block_name() + ": missing CHARGE header", lineno);
      }
      if (peaks.empty()) {
        throw ParseError(block_name() + ": empty block (no peaks)", lineno);
      }
      spectra.push_back(make_spectrum(title, charge, SpectrumKind::kObserved,
                                      std::move(peaks), pepmass));
      in_block = false;
      continue;
    }

    const bool header_like = !peaks_started &&
                             line.find('=') != std::string_view::npos &&
                             !(line[0] >= '0' && line[0] <= '9');
    if (header_like) {
      const std::size_t eq = line.find('=');
      std::string_view key = line.substr(0, eq);
      std::string_view value = trim(line.substr(eq + 1));
      if (key == "TITLE") {
        if (!title.empty()) {
          throw ParseError(block_name() + ": duplicate TITLE header", lineno);
        }
        if (value.empty()) {
          throw ParseError(block_name() + ": empty TITLE", lineno);
        }
        title = std::string(value);
      } else if (key == "CHARGE") {
        if (charge != 0) {
          throw ParseError(block_name() + ": duplicate CHARGE header",
                           lineno);
        }
        if (value.empty() || value.back() != '+') {
          throw ParseError(block_name() +
                               ": malformed CHARGE header, expected "
                               "\"CHARGE=<n>+\", got \"" +
                               std::string(line) + "\"",
                           lineno);
        }
        auto n = parse_int(value.substr(0, value.size() - 1));
        if (!n || *n < 1) {
          throw ParseError(block_name() + ": malformed CHARGE value \"" +
                               std::string(value) + "\"",
                           lineno);
        }
        charge = static_cast<int>(*n);
      } else if (key == "PEPMASS") {
        if (pepmass) {
          throw ParseError(block_name() + ": duplicate PEPMASS header",
                           lineno);
        }
        auto v = parse_double(value);
        if (!v || !(*v > 0)) {
          throw ParseError(block_name() + ": malformed PEPMASS value \"" +
                               std::string(value) + "\"",
                           lineno);
        }
        pepmass = *v;
      } else {
        throw ParseError(block_name() + ": unknown header \"" +
                             std::string(key) + "\"",
                         lineno);
      }
      continue;
    }

    Peak p = parse_peak_line(line, lineno, block_name());
    check_duplicate_mz(seen_mz, p, lineno, block_name());
    peaks.push_back(p);
    peaks_started = true;
  }

  if (in_block) {
    throw ParseError(block_name() + ": missing END IONS", block_line);
  }
  return spectra;
}

Spectrum parse_theoretical(std::string_view text) {
  const auto lines = split_lines(text);
  std::string id;
  int charge = 0;
  std::vector<Peak> peaks;
  std::map<double, int> seen_mz;
  bool data_started = false;

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int lineno = static_cast<int>(li) + 1;
    std::string_view line = trim(lines[li]);
    if (line.empty()) continue;

    if (line[0] == '#') {
      if (data_started) {
        throw ParseError("header line after data rows", lineno);
      }
      std::string_view body = trim(line.substr(1));
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError("malformed header \"" + std::string(line) + "\"",
                         lineno);
      }
      std::string_view key = trim(body.substr(0, eq));
      std::string_view value = trim(body.substr(eq + 1));
      if (key == "id") {
        if (!id.empty()) throw ParseError("duplicate id header", lineno);
        if (value.empty()) throw ParseError("empty id header", lineno);
        id = std::string(value);
      } else if (key == "charge") {
        if (charge != 0) throw ParseError("duplicate charge header", lineno);
        auto n = parse_int(value);
        if (!n || *n < 1) {
          throw ParseError("malformed charge value \"" + std::string(value) +
                               "\"",
                           lineno);
        }
        charge = static_cast<int>(*n);
      } else {
        throw ParseError("unknown header key \"" + std::string(key) + "\"",
                         lineno);
      }
      continue;
    }

    Peak p = parse_peak_line(line, lineno, "spectrum \"" + id + "\"");
    check_duplicate_mz(seen_mz, p, lineno, "spectrum \"" + id + "\"");
    peaks.push_back(p);
    data_started = true;
  }

  if (id.empty()) throw ParseError("missing \"# id=\" header", 1);
  if (charge == 0) throw ParseError("missing \"# charge=\" header", 1);
  if (peaks.empty()) {
    throw ParseError("spectrum \"" + id + "\": no peak rows", 1);
  }
  return make_spectrum(id, charge, SpectrumKind::kTheoretical,
                       std::move(peaks));
}

std::string serialize_observed(std::span<const Spectrum> spectra) {
  std::ostringstream out;
  bool first = true;
  for (const Spectrum& s : spectra) {
    if (!first) out << "\n";
    first = false;
    out << "BEGIN IONS\n";
    out << "TITLE=" << s.id << "\n";
    out << "CHARGE=" << s.charge << "+\n";
    if (s.precursor_mz) {
      out << "PEPMASS=" << format_double(*s.precursor_mz) << "\n";
    }
    for (const Peak& p : s.peaks) {
      out << format_double(p.mz) << " " << format_double(p.intensity) << "\n";
    }
    out << "END IONS\n";
  }
  return out.str();
}

std::string serialize_theoretical(const Spectrum& s) {
  std::ostringstream out;
  out << "# id=" << s.id << "\n";
  out << "# charge=" << s.charge << "\n";
  for (const Peak& p : s.peaks) {
    out << format_double(p.mz) << "\t" << format_double(p.intensity) << "\n";
  }
  return out.str();
}

namespace {

constexpr double kProtonMass = 1.00728;
constexpr double kWaterMass = 18.01056;

// Monoisotopic residue masses for the 20 standard amino acids.
double residue_mass(char aa, std::string_view sequence) {
  switch (aa) {
    case 'G': return 57.02146;
    case 'A': return 71.03711;
    case 'S': return 87.03203;
    case 'P': return 97.05276;
    case 'V': return 99.06841;
    case 'T': return 101.04768;
    case 'C': return 103.00919;
    case 'L': return 113.08406;
    case 'I': return 113.08406;
    case 'N': return 114.04293;
    case 'D': return 115.02694;
    case 'Q': return 128.05858;
    case 'K': return 128.09496;
    case 'E': return 129.04259;
    case 'M': return 131.04049;
    case 'H': return 137.05891;
    case 'F': return 147.06841;
    case 'R': return 156.10111;
    case 'Y': return 163.06333;
    case 'W': return 186.07931;
    default:
      throw std::invalid_argument("unknown residue '" + std::string(1, aa) +
                                  "' in sequence \"" + std::string(sequence) +
                                  "\"");
  }
}

}  // namespace

Spectrum generate_naive_theoretical(std::string_view sequence, int charge) {
  if (sequence.size() < 2) {
    throw std::invalid_argument(
        "sequence must have at least 2 residues, got \"" +
        std::string(sequence) + "\"");
  }
  const std::size_t len = sequence.size();
  std::vector<double> masses(len);
  for (std::size_t i = 0; i < len; ++i) {
    masses[i] = residue_mass(sequence[i], sequence);
  }

  // b_k: first k residues + proton; y_k: last k residues + water + proton.
  std::map<double, double> mz_to_intensity;
  double prefix = 0.0;
  double suffix = 0.0;
  for (std::size_t k = 1; k < len; ++k) {
    prefix += masses[k - 1];
    suffix += masses[len - k];
    mz_to_intensity[prefix + kProtonMass] += 1.0;
    mz_to_intensity[suffix + kWaterMass + kProtonMass] += 1.0;
  }

  std::vector<Peak> peaks;
  peaks.reserve(mz_to_intensity.size());
  for (const auto& [mz, intensity] : mz_to_intensity) {
    peaks.push_back(Peak{mz, intensity});
  }
  return make_spectrum(std::string(sequence), charge,
                       SpectrumKind::kTheoretical, std::move(peaks));
}

std::vector<Spectrum> load_observed_file(const std::string& path) {
  try {
    return parse_observed(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(ParseError::Raw{}, path + ": " + e.what(), e.line());
  }
}

Spectrum load_theoretical_file(const std::string& path) {
  try {
    return parse_theoretical(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(ParseError::Raw{}, path + ": " + e.what(), e.line());
  }
}

}  // namespace pepscore
