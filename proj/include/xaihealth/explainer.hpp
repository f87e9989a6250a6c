#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/model.hpp"
#include "xaihealth/tensor.hpp"

namespace xaihealth {

struct Attribution {
  Tensor values;
  std::size_t target_class = 0;
  std::string explainer_id;
};

enum class ExplainerKind { gradient_input, occlusion, constant, random };

struct ExplainerSpec {
  ExplainerKind kind = ExplainerKind::gradient_input;
  std::size_t patch_size = 1;  // occlusion
  double baseline = 0.0;       // occlusion
  std::uint64_t seed = 0;      // random
  double fill = 0.0;           // constant
};

nlohmann::json explainer_to_json(const ExplainerSpec& spec);
ExplainerSpec explainer_from_json(const nlohmann::json& doc);

/// Something that maps (model, input, target class) to a relevance value
/// per input cell. `instance_id` lets stochastic explainers stay
/// reproducible per dataset instance; the metric code passes the anchor
/// instance's id for every perturbed sample too.
class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> attribute(const Model& model, std::span<const double> input, const Shape& shape,
                                        std::size_t target_class, std::string_view instance_id) const = 0;
};

std::unique_ptr<Explainer> make_explainer(const ExplainerSpec& spec);

/// Adapter for ad-hoc explainers (used by tests and by custom integrations).
class FunctionExplainer final : public Explainer {
 public:
  using Fn = std::function<std::vector<double>(const Model&, std::span<const double>, std::size_t)>;
  FunctionExplainer(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::vector<double> attribute(const Model& model, std::span<const double> input, const Shape&,
                                std::size_t target_class, std::string_view) const override {
    return fn_(model, input, target_class);
  }

 private:
  std::string id_;
  Fn fn_;
};

Attribution explain(const Explainer& explainer, const Model& model, const Tensor& input, std::size_t target_class,
                    std::string_view instance_id = {});
Attribution explain(const ExplainerSpec& spec, const Model& model, const Tensor& input, std::size_t target_class,
                    std::string_view instance_id = {});

/// Scales to unit Euclidean norm; norms below 1e-12 map to all zeros.
Attribution normalize_attribution(const Attribution& a);
std::vector<double> normalized(std::span<const double> values);

/// Keeps the ceil(keep_fraction * d) cells of largest magnitude (lower flat
/// index wins ties) and zeroes the rest. keep_fraction must lie in (0, 1].
Attribution threshold_attribution(const Attribution& a, double keep_fraction);
std::vector<double> thresholded(std::span<const double> values, double keep_fraction);

/// Flat indices of the k largest |values|, ties broken by lower index.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

}  // namespace xaihealth
