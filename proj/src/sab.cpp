#include "xaihealth/sab.hpp"

#include <iomanip>
#include <sstream>

#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"
#include "xaihealth/rng.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;

std::string case_id(std::size_t i) {
  std::ostringstream ss;
  ss << "case-" << std::setw(4) << std::setfill('0') << i;
  return ss.str();
}

}  // namespace

void SabConfig::validate() const {
  if (grid < 4) throw Error(ErrorCode::InvalidConfig, "grid side must be >= 4");
  if (region.height == 0 || region.width == 0) throw Error(ErrorCode::RegionOutOfBounds, "region area must be >= 1");
  if (region.top + region.height > grid || region.left + region.width > grid)
    throw Error(ErrorCode::RegionOutOfBounds, "region does not fit inside the grid");
  if (num_cases < 2) throw Error(ErrorCode::InvalidConfig, "num_cases must be >= 2");
  if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_std must be >= 0");
  if (!(pattern_amplitude > 0.0)) throw Error(ErrorCode::InvalidConfig, "pattern_amplitude must be > 0");
}

SabConfig sab_config_from_json(const json& doc) {
  SabConfig cfg;
  try {
    cfg.grid = doc.value("grid", cfg.grid);
    if (doc.contains("region")) {
      const auto& r = doc["region"];
      cfg.region = Region{r.at("top").get<std::size_t>(), r.at("left").get<std::size_t>(),
                          r.at("height").get<std::size_t>(), r.at("width").get<std::size_t>()};
    }
    cfg.num_cases = doc.value("num_cases", cfg.num_cases);
    cfg.noise_std = doc.value("noise_std", cfg.noise_std);
    cfg.pattern_amplitude = doc.value("pattern_amplitude", cfg.pattern_amplitude);
    cfg.seed = doc.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return cfg;
}

json sab_config_to_json(const SabConfig& cfg) {
  return json{{"grid", cfg.grid},
              {"region",
               {{"top", cfg.region.top},
                {"left", cfg.region.left},
                {"height", cfg.region.height},
                {"width", cfg.region.width}}},
              {"num_cases", cfg.num_cases},
              {"noise_std", cfg.noise_std},
              {"pattern_amplitude", cfg.pattern_amplitude},
              {"seed", cfg.seed}};
}

Tensor region_mask(const SabConfig& cfg) {
  cfg.validate();
  std::vector<float> mask(cfg.grid * cfg.grid, 0.0f);
  for (std::size_t r = cfg.region.top; r < cfg.region.top + cfg.region.height; ++r)
    for (std::size_t c = cfg.region.left; c < cfg.region.left + cfg.region.width; ++c) mask[r * cfg.grid + c] = 1.0f;
  return Tensor({cfg.grid, cfg.grid}, std::move(mask));
}

SabBenchmark generate_sab(const SabConfig& cfg) {
  cfg.validate();
  const Tensor mask = region_mask(cfg);
  const std::size_t d = cfg.grid * cfg.grid;

  Dataset ds;
  ds.name = "sab-" + std::to_string(cfg.grid) + "x" + std::to_string(cfg.grid);
  ds.num_classes = 2;
  ds.anonymized = true;
  ds.consent_basis = "synthetic data, no personal information";
  ds.instances.reserve(cfg.num_cases);
  for (std::size_t i = 0; i < cfg.num_cases; ++i) {
    auto rng = stream_rng(cfg.seed, "sab-case", i);
    std::normal_distribution<double> noise(0.0, 1.0);
    const bool positive = (i % 2) == 1;
    const double pattern = positive ? cfg.pattern_amplitude : -cfg.pattern_amplitude;
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = cfg.noise_std * noise(rng);
      if (mask[k] != 0.0f) x[k] += pattern;
    }
    Instance inst;
    inst.id = case_id(i);
    inst.input = Tensor::from_doubles({cfg.grid, cfg.grid}, x);
    inst.label = positive ? 1 : 0;
    inst.roi = mask;
    inst.gt_attribution = mask;
    ds.instances.push_back(std::move(inst));
  }

  const double half_mass = 0.5 * cfg.pattern_amplitude * static_cast<double>(cfg.region.area());
  std::vector<double> weights(2 * d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    if (mask[k] != 0.0f) {
      weights[k] = -1.0;     // class 0
      weights[d + k] = 1.0;  // class 1
    }
  }
  // score1 - score0 = 2 * region_sum - 2 * half_mass, so class 1 wins iff
  // region_sum > half_mass.
  ModelSpec model = make_linear(2, d, std::move(weights), {half_mass, -half_mass});
  return SabBenchmark{std::move(ds), std::move(model)};
}

void write_sab(const SabBenchmark& sab, const std::filesystem::path& dir) {
  save_dataset(sab.dataset, dir);
  io::write_json(dir / "model.json", model_to_json(sab.model));
}

}  // namespace xaihealth
