#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pepscore {

// File-level failure (missing, unreadable, unwritable). The CLI maps these
// to exit code 2, data errors to exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lossless decimal rendering padded to at least 9 significant digits.
// The shortest round-trip form is extended with trailing zeros, so parsing
// the result recovers the identical double.
std::string format_double(double x);

// Strict full-token double / integer parsing (locale-free).
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

std::string read_file(const std::string& path);

// Writes via a temporary file in the same directory plus rename, so readers
// never observe a partial file.
void write_file_atomic(const std::string& path, std::string_view content);

std::string_view trim(std::string_view s);

}  // namespace pepscore
