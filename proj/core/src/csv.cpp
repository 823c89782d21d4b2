#include "ponzilens/csv.hpp"

#include <charconv>
#include <cstdio>

namespace ponzilens {

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_double(double value, int significant_digits) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, value);
  return std::string(buf, buf + n);
}

}  // namespace ponzilens
