#include <doctest.h>

#include "support.hpp"
#include "xaihealth/error.hpp"
#include "xaihealth/explainer.hpp"
#include "xaihealth/metrics.hpp"
#include "xaihealth/sab.hpp"

using namespace xaihealth;

namespace {

SabConfig config(double noise, double amplitude, std::size_t n) {
  SabConfig c;
  c.grid = 8;
  c.region = Region{2, 2, 2, 2};
  c.noise_std = noise;
  c.pattern_amplitude = amplitude;
  c.num_cases = n;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("noiseless benchmark is perfectly separable") {
  auto sab = generate_sab(config(0.0, 1.0, 20));
  Model model(sab.model);
  CHECK(accuracy(model, sab.dataset) == 1.0);
  CHECK(sab.dataset.anonymized);
}

TEST_CASE("gradient x input localises inside the region on noiseless cases") {
  auto sab = generate_sab(config(0.0, 1.0, 20));
  Model model(sab.model);
  ExplainerSpec gi;
  for (const auto& inst : sab.dataset.instances) {
    if (inst.label != 1) continue;
    auto a = explain(gi, model, inst.input, 1, inst.id);
    CHECK(localisation(a, *inst.roi) == 1.0);
  }
}

TEST_CASE("noisy benchmark stays easy for the transparent model") {
  auto sab = generate_sab(config(0.1, 2.0, 100));
  Model model(sab.model);
  CHECK(accuracy(model, sab.dataset) >= 0.95);
}

TEST_CASE("generation is deterministic and balanced") {
  auto a = generate_sab(config(0.1, 2.0, 10)), b = generate_sab(config(0.1, 2.0, 10));
  REQUIRE(a.dataset.size() == 10);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.dataset.instances[i].input == b.dataset.instances[i].input);
    positives += a.dataset.instances[i].label;
  }
  CHECK(positives == 5);
}

TEST_CASE("region must fit the grid") {
  auto c = config(0.0, 1.0, 4);
  c.region = Region{7, 7, 2, 2};
  CHECK_THROWS_AS(generate_sab(c), Error);
  c.region = Region{0, 0, 0, 1};
  CHECK_THROWS_AS(generate_sab(c), Error);
}

TEST_CASE("write and reload") {
  testing::TempDir dir;
  auto sab = generate_sab(config(0.1, 2.0, 6));
  write_sab(sab, dir.path());
  auto ds = load_dataset(dir / "manifest.json");
  CHECK(ds.size() == 6);
  CHECK(ds.instances[3].input == sab.dataset.instances[3].input);
  auto m = load_model(dir / "model.json");
  CHECK(m.layers[0].weights == sab.model.layers[0].weights);
}
