#include "pepscore/io_util.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pepscore {

namespace {

// Significant digits shown by a decimal string: mantissa digits net of
// leading zeros ("0.0001" has one, "100" has three).
int significant_digits(std::string_view s) {
  int count = 0;
  bool seen_nonzero = false;
  for (char c : s) {
    if (c == 'e' || c == 'E') break;
    if (c < '0' || c > '9') continue;
    if (c != '0') seen_nonzero = true;
    if (seen_nonzero) ++count;
  }
  return count;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";

  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  std::string s(buf, res.ptr);

  const int sig = significant_digits(s);
  if (sig >= 9) return s;
  int missing = 9 - (sig == 0 ? 1 : sig);  // "0" renders as 0.00000000

  // Pad the mantissa with trailing zeros; the decimal value is unchanged.
  std::size_t epos = s.find_first_of("eE");
  std::string mantissa = epos == std::string::npos ? s : s.substr(0, epos);
  std::string suffix = epos == std::string::npos ? "" : s.substr(epos);
  if (mantissa.find('.') == std::string::npos) mantissa += '.';
  mantissa.append(static_cast<std::size_t>(missing), '0');
  return mantissa + suffix;
}

std::optional<double> parse_double(std::string_view token) {
  if (token.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(std::string_view token) {
  if (token.empty()) return std::nullopt;
  long long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  if (in.bad()) throw IoError("error reading file: " + path);
  return out.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + tmp);
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("error writing file: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " +
                        ec.message());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace pepscore
