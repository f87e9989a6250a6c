#include "xaihealth/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

bool is_binary(const Tensor& t) {
  for (float v : t.data()) {
    if (v != 0.0f && v != 1.0f) return false;
  }
  return true;
}

void check_mask(const Instance& inst, const std::optional<Tensor>& mask, const char* what) {
  if (!mask) return;
  if (mask->shape() != inst.input.shape())
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " shape differs from input in instance '" + inst.id + "'");
  if (!is_binary(*mask))
    throw Error(ErrorCode::InvalidManifest, std::string(what) + " of instance '" + inst.id + "' is not a binary mask");
}

std::optional<Tensor> load_optional(const json& entry, const char* key, const fs::path& base, const std::string& id) {
  if (!entry.contains(key) || entry[key].is_null()) return std::nullopt;
  auto path = base / entry[key].get<std::string>();
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string() + " (instance '" + id + "')");
  return io::read_tensor(path);
}

}  // namespace

const Shape& Dataset::input_shape() const {
  if (instances.empty()) throw Error(ErrorCode::EmptyDataset, "dataset '" + name + "' has no instances");
  return instances.front().input.shape();
}

void validate_dataset(const Dataset& ds) {
  if (ds.num_classes < 2) throw Error(ErrorCode::InvalidManifest, "num_classes must be >= 2");
  std::unordered_set<std::string> ids;
  for (const auto& inst : ds.instances) {
    if (!ids.insert(inst.id).second) throw Error(ErrorCode::InvalidManifest, "duplicate instance id '" + inst.id + "'");
    if (inst.label >= ds.num_classes)
      throw Error(ErrorCode::LabelOutOfRange, "instance '" + inst.id + "' has label " + std::to_string(inst.label) +
                                                  " but num_classes is " + std::to_string(ds.num_classes));
    if (inst.input.shape() != ds.instances.front().input.shape())
      throw Error(ErrorCode::ShapeMismatch, "instance '" + inst.id + "' input shape differs from the first instance");
    check_mask(inst, inst.roi, "roi");
    check_mask(inst, inst.gt_attribution, "gt_attribution");
  }
}

Dataset parse_manifest(const json& manifest, const fs::path& base_dir) {
  if (!manifest.is_object()) throw Error(ErrorCode::InvalidManifest, "manifest must be a JSON object");
  if (!manifest.contains("anonymized") || !manifest["anonymized"].is_boolean())
    throw Error(ErrorCode::MissingAttestation, "manifest lacks the boolean 'anonymized' attestation");
  Dataset ds;
  try {
    ds.name = manifest.value("name", std::string{});
    ds.num_classes = manifest.at("num_classes").get<std::size_t>();
    ds.anonymized = manifest["anonymized"].get<bool>();
    ds.consent_basis = manifest.value("consent_basis", std::string{});
    for (const auto& entry : manifest.at("instances")) {
      Instance inst;
      inst.id = entry.at("id").get<std::string>();
      auto label = entry.at("label").get<long long>();
      if (label < 0) throw Error(ErrorCode::LabelOutOfRange, "instance '" + inst.id + "' has a negative label");
      inst.label = static_cast<std::size_t>(label);
      auto input_path = base_dir / entry.at("input").get<std::string>();
      if (!fs::exists(input_path))
        throw Error(ErrorCode::MissingFile, input_path.string() + " (instance '" + inst.id + "')");
      inst.input = io::read_tensor(input_path);
      inst.roi = load_optional(entry, "roi", base_dir, inst.id);
      inst.gt_attribution = load_optional(entry, "gt_attribution", base_dir, inst.id);
      ds.instances.push_back(std::move(inst));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidManifest, e.what());
  }
  validate_dataset(ds);
  return ds;
}

Dataset load_dataset(const fs::path& manifest_path) {
  return parse_manifest(io::read_json(manifest_path), manifest_path.parent_path());
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  validate_dataset(ds);
  fs::create_directories(dir / "tensors");
  json instances = json::array();
  for (const auto& inst : ds.instances) {
    json entry{{"id", inst.id}, {"label", inst.label}};
    auto rel = [&](const char* suffix) { return "tensors/" + inst.id + "." + suffix + ".xtn"; };
    entry["input"] = rel("input");
    io::write_tensor(dir / rel("input"), inst.input);
    if (inst.roi) {
      entry["roi"] = rel("roi");
      io::write_tensor(dir / rel("roi"), *inst.roi);
    }
    if (inst.gt_attribution) {
      entry["gt_attribution"] = rel("gt");
      io::write_tensor(dir / rel("gt"), *inst.gt_attribution);
    }
    instances.push_back(std::move(entry));
  }
  json manifest{{"name", ds.name},
                {"num_classes", ds.num_classes},
                {"anonymized", ds.anonymized},
                {"consent_basis", ds.consent_basis},
                {"instances", std::move(instances)}};
  io::write_json(dir / "manifest.json", manifest);
}

double input_std(const Dataset& ds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& inst : ds.instances) {
    for (float v : inst.input.data()) sum += v;
    n += inst.input.size();
  }
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "dataset '" + ds.name + "' has no values");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& inst : ds.instances) {
    for (float v : inst.input.data()) ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / static_cast<double>(n));
}

}  // namespace xaihealth
