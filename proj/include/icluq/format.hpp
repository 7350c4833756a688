// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace icluq {

/// Shortest decimal string that round-trips the double exactly. Used for
/// every float written to reports and fingerprints so that equal runs
/// produce equal bytes.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace icluq
