#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tailsampler {

/// A measured string of branch labels, site 0 first. Lexicographic order on
/// this type is the basis order used for probability intervals (site 0 is the
/// most significant digit).
using Outcome = std::vector<std::uint8_t>;

/// Big-endian integer index of an outcome in base `k`.
inline std::uint64_t outcome_index(std::span<const std::uint8_t> labels, std::size_t k) {
  std::uint64_t idx = 0;
  for (auto b : labels) idx = idx * k + b;
  return idx;
}

inline Outcome outcome_from_index(std::uint64_t idx, std::size_t n, std::size_t k) {
  Outcome out(n, 0);
  for (std::size_t i = n; i-- > 0;) {
    out[i] = static_cast<std::uint8_t>(idx % k);
    idx /= k;
  }
  return out;
}

inline std::string format_outcome(std::span<const std::uint8_t> labels,
                                  std::string_view alphabet = "0123456789") {
  std::string s;
  s.reserve(labels.size());
  for (auto b : labels) s.push_back(alphabet[b]);
  return s;
}

}  // namespace tailsampler
