#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/tensor.hpp"

namespace xaihealth {

struct Instance {
  std::string id;
  Tensor input;
  std::size_t label = 0;
  std::optional<Tensor> roi;             // binary mask, same shape as input
  std::optional<Tensor> gt_attribution;  // binary mask, same shape as input
};

/// A validated evaluation set. `anonymized` and `consent_basis` are the
/// privacy attestation carried by every manifest.
struct Dataset {
  std::string name;
  std::size_t num_classes = 2;
  bool anonymized = false;
  std::string consent_basis;
  std::vector<Instance> instances;

  std::size_t size() const noexcept { return instances.size(); }
  bool empty() const noexcept { return instances.empty(); }
  const Shape& input_shape() const;
  // Either anonymous data or a stated legal basis.
  bool attestation_present() const noexcept { return anonymized || !consent_basis.empty(); }
};

/// Throws ShapeMismatch / LabelOutOfRange / InvalidManifest naming the
/// offending instance id.
void validate_dataset(const Dataset& ds);

/// Parses a manifest document; tensor paths resolve relative to `base_dir`.
Dataset parse_manifest(const nlohmann::json& manifest, const std::filesystem::path& base_dir);
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `dir/manifest.json` plus one XTN1 file per tensor under `dir/tensors/`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Population standard deviation over every input value of every instance.
double input_std(const Dataset& ds);

}  // namespace xaihealth
