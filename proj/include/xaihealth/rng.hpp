#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace xaihealth {

/// Independent generator stream keyed by (seed, label, index). Used so each
/// dataset instance or generated case draws the same numbers no matter in
/// which order or on which worker it is processed.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
  std::vector<std::uint32_t> material{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  for (unsigned char c : label) material.push_back(c);
  std::seed_seq seq(material.begin(), material.end());
  return std::mt19937_64(seq);
}

}  // namespace xaihealth
