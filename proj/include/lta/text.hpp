#pragma once

#include <charconv>
#include <string>

namespace lta {

// Shortest decimal form that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace lta
