#pragma once

#include <charconv>
#include <string>

namespace sle {

/// Shortest decimal text that parses back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

}  // namespace sle
