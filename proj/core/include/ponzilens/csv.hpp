#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ponzilens {

// The file dialect is deliberately narrow: UTF-8, comma-separated, '\n' line
// endings, no quoting (fields never contain commas). A trailing '\r' is
// stripped so files touched by other tooling still load.
inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// Shortest decimal form that round-trips, for deterministic file output.
std::string format_double(double value);

// Fixed significant digits, for feature exports.
std::string format_double(double value, int significant_digits);

}  // namespace ponzilens
