#pragma once

#include <charconv>
#include <string>

namespace scgan {

/// Shortest round-trip decimal form, independent of stream state and locale.
inline std::string format_number(double v)
{
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

}  // namespace scgan
