#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/dataset.hpp"
#include "xaihealth/explainer.hpp"
#include "xaihealth/model.hpp"

namespace xaihealth {

/// Perturbation neighbourhood for the robustness metrics. When `epsilon` is
/// unset, callers substitute 0.1 x the dataset-wide input std.
struct PerturbationConfig {
  double epsilon = 0.1;
  std::size_t num_samples = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricSummary {
  std::vector<std::pair<std::string, double>> per_instance;  // sorted by instance id
  double mean = 0.0;
  double std = 0.0;  // population
};

/// Sorts by instance id, then mean and population std.
MetricSummary aggregate(std::vector<std::pair<std::string, double>> per_instance);
MetricSummary aggregate(std::span<const double> scores);

nlohmann::json summary_to_json(const MetricSummary& s);
MetricSummary summary_from_json(const nlohmann::json& doc);

/// Uniform directions on the sphere of radius epsilon (Gaussian direction,
/// normalized). Deterministic in (seed, instance_id).
std::vector<std::vector<double>> sphere_samples(std::size_t dim, const PerturbationConfig& cfg,
                                                std::string_view instance_id);
/// Uniform points in the ball of radius epsilon (radius = epsilon * u^(1/d)).
std::vector<std::vector<double>> ball_samples(std::size_t dim, const PerturbationConfig& cfg,
                                              std::string_view instance_id);

/// Bounded local Lipschitz estimate in [0, 1]: the largest half-distance
/// between the unit-normalized attribution at x and at points on the
/// epsilon-sphere around x. 0 means the explanation never moves.
double lle_score(const Model& model, const Explainer& explainer, const Instance& instance,
                 const PerturbationConfig& cfg);

enum class SensitivityMode { avg, max };

/// Mean or max of ||e(x) - e(x_j)|| on raw attributions over points drawn
/// uniformly in the epsilon-ball.
double sensitivity(const Model& model, const Explainer& explainer, const Instance& instance,
                   const PerturbationConfig& cfg, SensitivityMode mode);

struct FidelityRecord {
  double f1 = 0.0;
  double cosine = 0.0;
};

FidelityRecord fidelity_vs_gt(std::span<const double> attribution, std::span<const double> gt);
FidelityRecord fidelity_vs_gt(const Attribution& a, const Tensor& gt);

struct ComplexityRecord {
  double entropy = 0.0;
  double topk_mass = 0.0;
};

ComplexityRecord complexity(std::span<const double> attribution, std::size_t k);
ComplexityRecord complexity(const Attribution& a, std::size_t k);

double localisation(std::span<const double> attribution, std::span<const double> roi);
double localisation(const Attribution& a, const Tensor& roi);

/// Spearman correlation with average ranks for ties. Identical inputs give
/// 1; a constant input that differs from the other gives 0.
double spearman(std::span<const double> a, std::span<const double> b);

struct RandomisationRecord {
  std::vector<std::pair<std::string, double>> per_instance;
  double rho_mean = 0.0;
  bool pass = false;
};

/// Compares attributions from the model and from a copy with all parameters
/// redrawn from `reinit_seed`. Passes when the mean rank correlation falls
/// below `rho_max` (the explanation did react to the model).
RandomisationRecord randomisation_check(const Model& model, const Explainer& explainer, const Dataset& dataset,
                                        std::uint64_t reinit_seed, double rho_max = 0.5);

struct CsvRow {
  std::string instance_id;
  std::string metric;
  double score;
};

/// "instance_id,metric,score" with a header line.
std::string metrics_csv(std::span<const CsvRow> rows);

}  // namespace xaihealth
