#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/dataset.hpp"
#include "xaihealth/tensor.hpp"

namespace xaihealth {

enum class ModelKind { linear, mlp, external };

/// Affine map out = W·x + b with W stored row-major (outputs × inputs).
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::span<const double> row(std::size_t r) const { return {weights.data() + r * inputs, inputs}; }
};

struct ExternalCommand {
  std::vector<std::string> argv;
  std::filesystem::path working_directory;
  std::size_t num_classes = 0;
  std::chrono::milliseconds timeout{30000};
};

/// Linear models have exactly one layer; MLPs apply ReLU between layers and
/// leave the final layer's logits raw.
struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  std::vector<DenseLayer> layers;
  ExternalCommand external;

  void validate() const;
  std::size_t num_classes() const;
  // 0 for external models (width is whatever the process accepts).
  std::size_t input_width() const;
  bool built_in() const noexcept { return kind != ModelKind::external; }
};

ModelSpec make_linear(std::size_t num_classes, std::size_t inputs, std::vector<double> weights,
                      std::vector<double> bias);

nlohmann::json model_to_json(const ModelSpec& spec);
// Relative external working directories resolve against `base_dir`.
ModelSpec model_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ModelSpec load_model(const std::filesystem::path& path);

struct PredictionResult {
  std::vector<double> scores;
  std::size_t predicted_class = 0;
};

// Smallest index attaining the maximum.
std::size_t argmax(std::span<const double> scores) noexcept;

/// Raw class scores of a built-in model (forward pass in double precision).
std::vector<double> forward_scores(const ModelSpec& spec, std::span<const double> x);
/// d score[class_index] / d x for built-in models. ReLU'(0) is taken as 0.
std::vector<double> input_gradient(const ModelSpec& spec, std::span<const double> x, std::size_t class_index);

class ExternalModel;

/// A ready-to-query model. Built-in specs evaluate in process; external
/// specs own a child process that is launched on first use and reused.
class Model {
 public:
  explicit Model(ModelSpec spec);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t num_classes() const { return spec_.num_classes(); }

  std::vector<double> scores(std::span<const double> x, const Shape& shape) const;
  std::vector<double> gradient(std::span<const double> x, std::size_t class_index) const;

 private:
  ModelSpec spec_;
  std::unique_ptr<ExternalModel> external_;
};

PredictionResult predict(const Model& model, const Tensor& input);
PredictionResult predict(const ModelSpec& spec, const Tensor& input);
Tensor gradient(const Model& model, const Tensor& input, std::size_t class_index);
Tensor gradient(const ModelSpec& spec, const Tensor& input, std::size_t class_index);

/// Fraction of instances whose predicted class equals the label.
double accuracy(const Model& model, const Dataset& dataset);

/// Copy of a built-in model with every weight and bias redrawn uniformly
/// from [-1, 1] using `seed`.
ModelSpec randomize_parameters(const ModelSpec& spec, std::uint64_t seed);

}  // namespace xaihealth
