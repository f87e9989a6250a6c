#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "xaihealth/dataset.hpp"
#include "xaihealth/model.hpp"

namespace xaihealth {

struct Region {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t area() const noexcept { return height * width; }
};

/// Synthetic attribution benchmark: s×s inputs whose class evidence lives
/// entirely inside a known rectangular region.
struct SabConfig {
  std::size_t grid = 8;
  Region region{2, 2, 2, 2};
  std::size_t num_cases = 100;
  double noise_std = 0.1;
  double pattern_amplitude = 2.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SabBenchmark {
  Dataset dataset;
  ModelSpec model;  // transparent linear scorer
};

SabConfig sab_config_from_json(const nlohmann::json& doc);
nlohmann::json sab_config_to_json(const SabConfig& cfg);

Tensor region_mask(const SabConfig& cfg);

/// Case i is positive iff i is odd (floor(n/2) positives). Background is
/// N(0, noise_std) per cell; positives add +amplitude on every region cell
/// and negatives add -amplitude. The transparent model scores class 1 with
/// +1 on region cells and class 0 with -1, biased so the noiseless decision
/// threshold on the region sum sits at half the added mass.
SabBenchmark generate_sab(const SabConfig& cfg);

/// Writes manifest.json + tensors/ + model.json into `dir`.
void write_sab(const SabBenchmark& sab, const std::filesystem::path& dir);

}  // namespace xaihealth
