#include "xaihealth/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaihealth/error.hpp"
#include "xaihealth/rng.hpp"
#include "xaihealth/simd/kernels.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;

class GradientInputExplainer final : public Explainer {
 public:
  std::string id() const override { return "gradient_input"; }
  std::vector<double> attribute(const Model& model, std::span<const double> input, const Shape&,
                                std::size_t target, std::string_view) const override {
    auto g = model.gradient(input, target);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= input[i];
    return g;
  }
};

// Tiles the input into hyper-rectangular patches of side `patch` (edge
// patches may be smaller) and writes each patch's full score drop to all of
// its cells.
class OcclusionExplainer final : public Explainer {
 public:
  OcclusionExplainer(std::size_t patch, double baseline) : patch_(patch), baseline_(baseline) {
    if (patch_ == 0) throw Error(ErrorCode::InvalidConfig, "occlusion patch size must be >= 1");
  }
  std::string id() const override { return "occlusion(p=" + std::to_string(patch_) + ")"; }

  std::vector<double> attribute(const Model& model, std::span<const double> input, const Shape& shape,
                                std::size_t target, std::string_view) const override {
    for (auto d : shape) {
      if (patch_ > d) throw Error(ErrorCode::InvalidConfig, "occlusion patch larger than an input dimension");
    }
    const double reference = model.scores(input, shape).at(target);
    const std::size_t nd = shape.size();
    std::vector<std::size_t> strides(nd, 1);
    for (std::size_t k = nd - 1; k-- > 0;) strides[k] = strides[k + 1] * shape[k + 1];
    std::vector<std::size_t> patches(nd);
    for (std::size_t k = 0; k < nd; ++k) patches[k] = (shape[k] + patch_ - 1) / patch_;

    std::vector<double> out(input.size(), 0.0);
    std::vector<double> masked(input.begin(), input.end());
    std::vector<std::size_t> cells;
    std::vector<std::size_t> pidx(nd, 0);
    for (;;) {
      collect_cells(shape, strides, pidx, cells);
      for (auto c : cells) masked[c] = baseline_;
      const double drop = reference - model.scores(masked, shape).at(target);
      for (auto c : cells) {
        out[c] = drop;
        masked[c] = input[c];
      }
      std::size_t k = nd;
      while (k-- > 0) {
        if (++pidx[k] < patches[k]) break;
        pidx[k] = 0;
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
    return out;
  }

 private:
  void collect_cells(const Shape& shape, const std::vector<std::size_t>& strides,
                     const std::vector<std::size_t>& pidx, std::vector<std::size_t>& cells) const {
    cells.clear();
    const std::size_t nd = shape.size();
    std::vector<std::size_t> lo(nd), hi(nd), cur(nd);
    for (std::size_t k = 0; k < nd; ++k) {
      lo[k] = pidx[k] * patch_;
      hi[k] = std::min(shape[k], lo[k] + patch_);
      cur[k] = lo[k];
    }
    for (;;) {
      std::size_t flat = 0;
      for (std::size_t k = 0; k < nd; ++k) flat += cur[k] * strides[k];
      cells.push_back(flat);
      std::size_t k = nd;
      while (k-- > 0) {
        if (++cur[k] < hi[k]) break;
        cur[k] = lo[k];
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
  }

  std::size_t patch_;
  double baseline_;
};

class ConstantExplainer final : public Explainer {
 public:
  explicit ConstantExplainer(double fill) : fill_(fill) {}
  std::string id() const override { return "constant"; }
  std::vector<double> attribute(const Model&, std::span<const double> input, const Shape&, std::size_t,
                                std::string_view) const override {
    return std::vector<double>(input.size(), fill_);
  }

 private:
  double fill_;
};

class RandomExplainer final : public Explainer {
 public:
  explicit RandomExplainer(std::uint64_t seed) : seed_(seed) {}
  std::string id() const override { return "random"; }
  std::vector<double> attribute(const Model&, std::span<const double> input, const Shape&, std::size_t,
                                std::string_view instance_id) const override {
    auto rng = stream_rng(seed_, instance_id);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(input.size());
    for (auto& v : out) v = u(rng);
    return out;
  }

 private:
  std::uint64_t seed_;
};

}  // namespace

json explainer_to_json(const ExplainerSpec& spec) {
  switch (spec.kind) {
    case ExplainerKind::gradient_input: return json{{"kind", "gradient_input"}};
    case ExplainerKind::occlusion:
      return json{{"kind", "occlusion"}, {"patch_size", spec.patch_size}, {"baseline", spec.baseline}};
    case ExplainerKind::constant: return json{{"kind", "constant"}, {"fill", spec.fill}};
    case ExplainerKind::random: return json{{"kind", "random"}, {"seed", spec.seed}};
  }
  return {};
}

ExplainerSpec explainer_from_json(const json& doc) {
  ExplainerSpec spec;
  try {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "gradient_input") {
      spec.kind = ExplainerKind::gradient_input;
    } else if (kind == "occlusion") {
      spec.kind = ExplainerKind::occlusion;
      spec.patch_size = doc.value("patch_size", std::size_t{1});
      spec.baseline = doc.value("baseline", 0.0);
      if (spec.patch_size == 0) throw Error(ErrorCode::InvalidConfig, "occlusion patch_size must be >= 1");
    } else if (kind == "constant") {
      spec.kind = ExplainerKind::constant;
      spec.fill = doc.value("fill", 0.0);
    } else if (kind == "random") {
      spec.kind = ExplainerKind::random;
      spec.seed = doc.value("seed", std::uint64_t{0});
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown explainer kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return spec;
}

std::unique_ptr<Explainer> make_explainer(const ExplainerSpec& spec) {
  switch (spec.kind) {
    case ExplainerKind::gradient_input: return std::make_unique<GradientInputExplainer>();
    case ExplainerKind::occlusion: return std::make_unique<OcclusionExplainer>(spec.patch_size, spec.baseline);
    case ExplainerKind::constant: return std::make_unique<ConstantExplainer>(spec.fill);
    case ExplainerKind::random: return std::make_unique<RandomExplainer>(spec.seed);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown explainer kind");
}

Attribution explain(const Explainer& explainer, const Model& model, const Tensor& input, std::size_t target_class,
                    std::string_view instance_id) {
  if (target_class >= model.num_classes())
    throw Error(ErrorCode::InvalidConfig, "target class " + std::to_string(target_class) + " out of range");
  auto x = input.to_doubles();
  auto values = explainer.attribute(model, x, input.shape(), target_class, instance_id);
  return Attribution{Tensor::from_doubles(input.shape(), values), target_class, explainer.id()};
}

Attribution explain(const ExplainerSpec& spec, const Model& model, const Tensor& input, std::size_t target_class,
                    std::string_view instance_id) {
  return explain(*make_explainer(spec), model, input, target_class, instance_id);
}

std::vector<double> normalized(std::span<const double> values) {
  const double norm = std::sqrt(simd::sum_squares(values));
  std::vector<double> out(values.size(), 0.0);
  if (norm < 1e-12) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] / norm;
  return out;
}

Attribution normalize_attribution(const Attribution& a) {
  auto values = normalized(a.values.to_doubles());
  return Attribution{Tensor::from_doubles(a.values.shape(), values), a.target_class, a.explainer_id};
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double fa = std::fabs(values[a]);
                      const double fb = std::fabs(values[b]);
                      return fa != fb ? fa > fb : a < b;
                    });
  order.resize(k);
  return order;
}

std::vector<double> thresholded(std::span<const double> values, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw Error(ErrorCode::BadFraction, "keep_fraction must lie in (0, 1]");
  const auto d = values.size();
  // Guard against products like 0.7 * 10 landing a hair above the integer.
  const auto k = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(d) - 1e-9));
  std::vector<double> out(d, 0.0);
  for (auto i : top_k_indices(values, k)) out[i] = values[i];
  return out;
}

Attribution threshold_attribution(const Attribution& a, double keep_fraction) {
  auto values = thresholded(a.values.to_doubles(), keep_fraction);
  return Attribution{Tensor::from_doubles(a.values.shape(), values), a.target_class, a.explainer_id};
}

}  // namespace xaihealth
