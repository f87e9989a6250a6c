#include "xaihealth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xaihealth/error.hpp"
#include "xaihealth/rng.hpp"
#include "xaihealth/simd/kernels.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;

std::vector<double> unit_gaussian_direction(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    for (auto& x : v) x = n(rng);
    norm2 = simd::sum_squares(v);
  } while (norm2 < 1e-300);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

std::size_t anchor_class(const Model& model, std::span<const double> x, const Shape& shape) {
  return argmax(model.scores(x, shape));
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": attribution and mask sizes differ");
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

void PerturbationConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidConfig, "epsilon must be finite and > 0");
  if (num_samples < 2) throw Error(ErrorCode::InvalidConfig, "num_samples must be >= 2");
}

MetricSummary aggregate(std::vector<std::pair<std::string, double>> per_instance) {
  if (per_instance.empty()) throw Error(ErrorCode::EmptyInput, "no scores to aggregate");
  std::sort(per_instance.begin(), per_instance.end());
  MetricSummary s;
  double sum = 0.0;
  for (const auto& [id, v] : per_instance) sum += v;
  const double n = static_cast<double>(per_instance.size());
  s.mean = sum / n;
  double ss = 0.0;
  for (const auto& [id, v] : per_instance) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  s.per_instance = std::move(per_instance);
  return s;
}

MetricSummary aggregate(std::span<const double> scores) {
  std::vector<std::pair<std::string, double>> items;
  items.reserve(scores.size());
  const auto width = std::to_string(scores.size()).size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto id = std::to_string(i);
    items.emplace_back(std::string(width - id.size(), '0') + id, scores[i]);
  }
  return aggregate(std::move(items));
}

json summary_to_json(const MetricSummary& s) {
  json per = json::array();
  for (const auto& [id, v] : s.per_instance) per.push_back(json{{"instance_id", id}, {"score", v}});
  return json{{"mean", s.mean}, {"std", s.std}, {"per_instance", std::move(per)}};
}

MetricSummary summary_from_json(const json& doc) {
  MetricSummary s;
  s.mean = doc.at("mean").get<double>();
  s.std = doc.at("std").get<double>();
  for (const auto& e : doc.value("per_instance", json::array()))
    s.per_instance.emplace_back(e.at("instance_id").get<std::string>(), e.at("score").get<double>());
  return s;
}

std::vector<std::vector<double>> sphere_samples(std::size_t dim, const PerturbationConfig& cfg,
                                                std::string_view instance_id) {
  cfg.validate();
  auto rng = stream_rng(cfg.seed, instance_id, 1);
  std::vector<std::vector<double>> out;
  out.reserve(cfg.num_samples);
  for (std::size_t j = 0; j < cfg.num_samples; ++j) {
    auto v = unit_gaussian_direction(rng, dim);
    for (auto& x : v) x *= cfg.epsilon;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> ball_samples(std::size_t dim, const PerturbationConfig& cfg,
                                              std::string_view instance_id) {
  cfg.validate();
  auto rng = stream_rng(cfg.seed, instance_id, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> out;
  out.reserve(cfg.num_samples);
  for (std::size_t j = 0; j < cfg.num_samples; ++j) {
    auto v = unit_gaussian_direction(rng, dim);
    const double radius = cfg.epsilon * std::pow(u(rng), 1.0 / static_cast<double>(dim));
    for (auto& x : v) x *= radius;
    out.push_back(std::move(v));
  }
  return out;
}

double lle_score(const Model& model, const Explainer& explainer, const Instance& instance,
                 const PerturbationConfig& cfg) {
  const auto x = instance.input.to_doubles();
  const auto& shape = instance.input.shape();
  const auto target = anchor_class(model, x, shape);
  const auto anchor = normalized(explainer.attribute(model, x, shape, target, instance.id));

  double worst = 0.0;
  std::vector<double> xj(x.size());
  for (const auto& delta : sphere_samples(x.size(), cfg, instance.id)) {
    for (std::size_t i = 0; i < x.size(); ++i) xj[i] = x[i] + delta[i];
    const auto ej = normalized(explainer.attribute(model, xj, shape, target, instance.id));
    worst = std::max(worst, 0.5 * std::sqrt(simd::squared_distance(anchor, ej)));
  }
  // Two unit vectors are at most 2 apart; anything beyond is rounding.
  if (!(worst >= 0.0 && worst <= 1.0 + 1e-9))
    throw Error(ErrorCode::InvalidConfig, "LLE score left [0,1]: " + std::to_string(worst));
  return std::min(worst, 1.0);
}

double sensitivity(const Model& model, const Explainer& explainer, const Instance& instance,
                   const PerturbationConfig& cfg, SensitivityMode mode) {
  const auto x = instance.input.to_doubles();
  const auto& shape = instance.input.shape();
  const auto target = anchor_class(model, x, shape);
  const auto anchor = explainer.attribute(model, x, shape, target, instance.id);

  double worst = 0.0;
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xj(x.size());
  for (const auto& delta : ball_samples(x.size(), cfg, instance.id)) {
    for (std::size_t i = 0; i < x.size(); ++i) xj[i] = x[i] + delta[i];
    const auto ej = explainer.attribute(model, xj, shape, target, instance.id);
    const double dist = std::sqrt(simd::squared_distance(anchor, ej));
    worst = std::max(worst, dist);
    total += dist;
    ++count;
  }
  return mode == SensitivityMode::max ? worst : total / static_cast<double>(count);
}

FidelityRecord fidelity_vs_gt(std::span<const double> attribution, std::span<const double> gt) {
  require_same_size(attribution.size(), gt.size(), "fidelity");
  std::size_t k = 0;
  for (double g : gt) k += g != 0.0 ? 1 : 0;
  if (k == 0) throw Error(ErrorCode::EmptyGroundTruth, "ground-truth mask has no positive cells");

  std::size_t overlap = 0;
  for (auto i : top_k_indices(attribution, k)) overlap += gt[i] != 0.0 ? 1 : 0;

  std::vector<double> mag(attribution.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::fabs(attribution[i]);
  const double denom = std::sqrt(simd::sum_squares(mag)) * std::sqrt(simd::sum_squares(gt));
  FidelityRecord r;
  r.f1 = 2.0 * static_cast<double>(overlap) / static_cast<double>(2 * k);
  r.cosine = denom > 0.0 ? simd::dot(mag, gt) / denom : 0.0;
  return r;
}

FidelityRecord fidelity_vs_gt(const Attribution& a, const Tensor& gt) {
  if (a.values.shape() != gt.shape()) throw Error(ErrorCode::ShapeMismatch, "attribution and ground truth shapes differ");
  return fidelity_vs_gt(a.values.to_doubles(), gt.to_doubles());
}

ComplexityRecord complexity(std::span<const double> attribution, std::size_t k) {
  if (k == 0 || k > attribution.size()) throw Error(ErrorCode::InvalidConfig, "k must lie in [1, d]");
  const double total = simd::sum_abs(attribution);
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroAttribution, "complexity of an all-zero attribution");
  std::vector<double> p(attribution.size());
  double entropy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::fabs(attribution[i]) / total;
    if (p[i] > 0.0) entropy -= p[i] * std::log(p[i]);
  }
  std::partial_sort(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k), p.end(), std::greater<>());
  ComplexityRecord r;
  r.entropy = entropy;
  r.topk_mass = std::accumulate(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
  return r;
}

ComplexityRecord complexity(const Attribution& a, std::size_t k) { return complexity(a.values.to_doubles(), k); }

double localisation(std::span<const double> attribution, std::span<const double> roi) {
  require_same_size(attribution.size(), roi.size(), "localisation");
  const double total = simd::sum_abs(attribution);
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroAttribution, "localisation of an all-zero attribution");
  double inside = 0.0;
  for (std::size_t i = 0; i < roi.size(); ++i) {
    if (roi[i] != 0.0) inside += std::fabs(attribution[i]);
  }
  return inside / total;
}

double localisation(const Attribution& a, const Tensor& roi) {
  if (a.values.shape() != roi.shape()) throw Error(ErrorCode::ShapeMismatch, "attribution and roi shapes differ");
  return localisation(a.values.to_doubles(), roi.to_doubles());
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "spearman: length mismatch");
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "spearman of empty vectors");
  if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  for (auto& r : ra) r -= mean;
  for (auto& r : rb) r -= mean;
  const double va = simd::sum_squares(ra);
  const double vb = simd::sum_squares(rb);
  if (va == 0.0 || vb == 0.0) return 0.0;
  return std::clamp(simd::dot(ra, rb) / std::sqrt(va * vb), -1.0, 1.0);
}

RandomisationRecord randomisation_check(const Model& model, const Explainer& explainer, const Dataset& dataset,
                                        std::uint64_t reinit_seed, double rho_max) {
  if (!model.spec().built_in())
    throw Error(ErrorCode::UnsupportedForExternal, "randomisation needs access to model parameters");
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "randomisation over an empty dataset");
  const Model randomized(randomize_parameters(model.spec(), reinit_seed));

  std::vector<std::pair<std::string, double>> rhos;
  for (const auto& inst : dataset.instances) {
    const auto x = inst.input.to_doubles();
    const auto& shape = inst.input.shape();
    const auto target = anchor_class(model, x, shape);
    const auto original = explainer.attribute(model, x, shape, target, inst.id);
    const auto shuffled = explainer.attribute(randomized, x, shape, target, inst.id);
    rhos.emplace_back(inst.id, spearman(original, shuffled));
  }
  std::sort(rhos.begin(), rhos.end());
  RandomisationRecord r;
  double sum = 0.0;
  for (const auto& [id, rho] : rhos) sum += rho;
  r.rho_mean = sum / static_cast<double>(rhos.size());
  r.pass = r.rho_mean < rho_max;
  r.per_instance = std::move(rhos);
  return r;
}

std::string metrics_csv(std::span<const CsvRow> rows) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "instance_id,metric,score\n";
  for (const auto& r : rows) ss << r.instance_id << ',' << r.metric << ',' << r.score << '\n';
  return ss.str();
}

}  // namespace xaihealth
