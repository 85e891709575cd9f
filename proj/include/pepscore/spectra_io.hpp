#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pepscore/spectrum.hpp"

namespace pepscore {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  struct Raw {};  // message used verbatim (for wrapping with a file path)
  ParseError(Raw, const std::string& full_message, int line)
      : std::runtime_error(full_message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// MGF-style peak list document:
//   BEGIN IONS
//   TITLE=<id>
//   CHARGE=<n>+
//   PEPMASS=<mz>        (optional)
//   <mz> <intensity>    (one pair per line)
//   END IONS
// Any defect aborts the whole parse with the offending line and block.
std::vector<Spectrum> parse_observed(std::string_view text);

// Theoretical spectrum document: comment-prefixed header lines
// "# id=<id>" and "# charge=<n>", then one "mz<TAB>intensity" row per peak.
Spectrum parse_theoretical(std::string_view text);

std::string serialize_observed(std::span<const Spectrum> spectra);
std::string serialize_theoretical(const Spectrum& s);

// Singly charged b/y fragment ladder with unit intensities, from the
// standard monoisotopic residue masses. This is deliberately naive: it
// exists so the pipeline can run end to end without an external
// intensity-prediction tool. Fragments that collide in m/z are pooled.
Spectrum generate_naive_theoretical(std::string_view sequence, int charge);

std::vector<Spectrum> load_observed_file(const std::string& path);
Spectrum load_theoretical_file(const std::string& path);

}  // namespace pepscore
