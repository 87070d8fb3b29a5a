#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace decsim {

/// Shortest round-trip decimal form of a double.
inline std::string format_real(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace decsim
