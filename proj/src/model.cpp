#include "xaihealth/model.hpp"

#include <random>

#include "xaihealth/error.hpp"
#include "xaihealth/external_model.hpp"
#include "xaihealth/io.hpp"
#include "xaihealth/simd/kernels.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;

DenseLayer layer_from_json(const json& weights, const json& bias) {
  DenseLayer layer;
  layer.outputs = weights.size();
  if (layer.outputs == 0) throw Error(ErrorCode::InvalidModel, "weight matrix has no rows");
  layer.inputs = weights.front().size();
  for (const auto& row : weights) {
    if (row.size() != layer.inputs) throw Error(ErrorCode::InvalidModel, "ragged weight matrix");
    for (const auto& v : row) layer.weights.push_back(v.get<double>());
  }
  layer.bias = bias.is_null() ? std::vector<double>(layer.outputs, 0.0) : bias.get<std::vector<double>>();
  return layer;
}

json layer_to_json(const DenseLayer& layer) {
  json rows = json::array();
  for (std::size_t r = 0; r < layer.outputs; ++r) {
    auto row = layer.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return json{{"weights", std::move(rows)}, {"bias", layer.bias}};
}

void require_built_in(const ModelSpec& spec) {
  if (!spec.built_in())
    throw Error(ErrorCode::UnsupportedForExternal, "operation needs a built-in (linear or mlp) model");
}

}  // namespace

void ModelSpec::validate() const {
  if (kind == ModelKind::external) {
    if (external.argv.empty()) throw Error(ErrorCode::InvalidModel, "external model needs a command");
    if (external.num_classes < 2) throw Error(ErrorCode::InvalidModel, "external model needs num_classes >= 2");
    return;
  }
  if (layers.empty()) throw Error(ErrorCode::InvalidModel, "model has no layers");
  if (kind == ModelKind::linear && layers.size() != 1)
    throw Error(ErrorCode::InvalidModel, "linear model must have exactly one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.inputs == 0 || l.outputs == 0) throw Error(ErrorCode::InvalidModel, "layer with zero width");
    if (l.weights.size() != l.inputs * l.outputs || l.bias.size() != l.outputs)
      throw Error(ErrorCode::InvalidModel, "layer " + std::to_string(i) + " has inconsistent parameter counts");
    if (i > 0 && layers[i - 1].outputs != l.inputs)
      throw Error(ErrorCode::InvalidModel, "layer " + std::to_string(i) + " input width does not chain");
  }
  if (layers.back().outputs < 2) throw Error(ErrorCode::InvalidModel, "model must score at least two classes");
}

std::size_t ModelSpec::num_classes() const {
  if (kind == ModelKind::external) return external.num_classes;
  return layers.empty() ? 0 : layers.back().outputs;
}

std::size_t ModelSpec::input_width() const {
  if (kind == ModelKind::external || layers.empty()) return 0;
  return layers.front().inputs;
}

ModelSpec make_linear(std::size_t num_classes, std::size_t inputs, std::vector<double> weights,
                      std::vector<double> bias) {
  ModelSpec spec;
  spec.kind = ModelKind::linear;
  spec.layers.push_back(DenseLayer{inputs, num_classes, std::move(weights), std::move(bias)});
  spec.validate();
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::linear: {
      auto doc = layer_to_json(spec.layers.at(0));
      doc["kind"] = "linear";
      return doc;
    }
    case ModelKind::mlp: {
      json layers = json::array();
      for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
      return json{{"kind", "mlp"}, {"layers", std::move(layers)}};
    }
    case ModelKind::external:
      return json{{"kind", "external"},
                  {"command", spec.external.argv},
                  {"working_directory", spec.external.working_directory.string()},
                  {"num_classes", spec.external.num_classes},
                  {"timeout_ms", spec.external.timeout.count()}};
  }
  return {};
}

ModelSpec model_from_json(const json& doc, const std::filesystem::path& base_dir) {
  ModelSpec spec;
  try {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "linear") {
      spec.kind = ModelKind::linear;
      spec.layers.push_back(layer_from_json(doc.at("weights"), doc.value("bias", json())));
    } else if (kind == "mlp") {
      spec.kind = ModelKind::mlp;
      for (const auto& l : doc.at("layers")) spec.layers.push_back(layer_from_json(l.at("weights"), l.value("bias", json())));
    } else if (kind == "external") {
      spec.kind = ModelKind::external;
      spec.external.argv = doc.at("command").get<std::vector<std::string>>();
      std::filesystem::path wd = doc.value("working_directory", std::string{});
      spec.external.working_directory = wd.empty() || wd.is_absolute() ? wd : base_dir / wd;
      spec.external.num_classes = doc.at("num_classes").get<std::size_t>();
      spec.external.timeout = std::chrono::milliseconds(doc.value("timeout_ms", 30000));
    } else {
      throw Error(ErrorCode::InvalidModel, "unknown model kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, e.what());
  }
  spec.validate();
  return spec;
}

ModelSpec load_model(const std::filesystem::path& path) {
  return model_from_json(io::read_json(path), path.parent_path());
}

std::size_t argmax(std::span<const double> scores) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::vector<double> forward_scores(const ModelSpec& spec, std::span<const double> x) {
  require_built_in(spec);
  if (x.size() != spec.input_width())
    throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(spec.input_width()) +
                                              " inputs, got " + std::to_string(x.size()));
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    std::vector<double> out(l.outputs);
    simd::gemv(l.weights, act, l.bias, out);
    if (i + 1 < spec.layers.size()) {
      for (auto& v : out) v = v > 0.0 ? v : 0.0;
    }
    act = std::move(out);
  }
  return act;
}

std::vector<double> input_gradient(const ModelSpec& spec, std::span<const double> x, std::size_t class_index) {
  require_built_in(spec);
  if (class_index >= spec.num_classes())
    throw Error(ErrorCode::InvalidConfig, "class index " + std::to_string(class_index) + " out of range");
  if (x.size() != spec.input_width())
    throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(spec.input_width()) + " inputs");

  // Forward pass keeping pre-activations of hidden layers.
  std::vector<std::vector<double>> pre(spec.layers.size());
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    pre[i].resize(l.outputs);
    simd::gemv(l.weights, act, l.bias, pre[i]);
    act = pre[i];
    if (i + 1 < spec.layers.size()) {
      for (auto& v : act) v = v > 0.0 ? v : 0.0;
    }
  }

  std::vector<double> upstream(spec.layers.back().outputs, 0.0);
  upstream[class_index] = 1.0;
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const auto& l = spec.layers[i];
    std::vector<double> down(l.inputs, 0.0);
    for (std::size_t r = 0; r < l.outputs; ++r) {
      if (upstream[r] != 0.0) simd::axpy(upstream[r], l.row(r), down);
    }
    if (i > 0) {
      const auto& z = pre[i - 1];
      for (std::size_t k = 0; k < down.size(); ++k) {
        if (!(z[k] > 0.0)) down[k] = 0.0;
      }
    }
    upstream = std::move(down);
  }
  return upstream;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == ModelKind::external) external_ = std::make_unique<ExternalModel>(spec_.external);
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

std::vector<double> Model::scores(std::span<const double> x, const Shape& shape) const {
  if (external_) {
    auto s = external_->query(x, shape);
    return s;
  }
  return forward_scores(spec_, x);
}

std::vector<double> Model::gradient(std::span<const double> x, std::size_t class_index) const {
  return input_gradient(spec_, x, class_index);
}

PredictionResult predict(const Model& model, const Tensor& input) {
  auto x = input.to_doubles();
  PredictionResult r;
  r.scores = model.scores(x, input.shape());
  r.predicted_class = argmax(r.scores);
  return r;
}

PredictionResult predict(const ModelSpec& spec, const Tensor& input) {
  require_built_in(spec);
  PredictionResult r;
  r.scores = forward_scores(spec, input.to_doubles());
  r.predicted_class = argmax(r.scores);
  return r;
}

Tensor gradient(const Model& model, const Tensor& input, std::size_t class_index) {
  return Tensor::from_doubles(input.shape(), model.gradient(input.to_doubles(), class_index));
}

Tensor gradient(const ModelSpec& spec, const Tensor& input, std::size_t class_index) {
  return Tensor::from_doubles(input.shape(), input_gradient(spec, input.to_doubles(), class_index));
}

double accuracy(const Model& model, const Dataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "accuracy over an empty dataset");
  std::size_t correct = 0;
  for (const auto& inst : dataset.instances) {
    if (predict(model, inst.input).predicted_class == inst.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

ModelSpec randomize_parameters(const ModelSpec& spec, std::uint64_t seed) {
  require_built_in(spec);
  ModelSpec out = spec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& l : out.layers) {
    for (auto& w : l.weights) w = u(rng);
    for (auto& b : l.bias) b = u(rng);
  }
  return out;
}

}  // namespace xaihealth
