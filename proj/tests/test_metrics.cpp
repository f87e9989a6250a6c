#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "xaihealth/error.hpp"
#include "xaihealth/explainer.hpp"
#include "xaihealth/metrics.hpp"

using namespace xaihealth;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

Model model2() { return Model(make_linear(2, 2, {1, 0, 0, 1}, {0, 0})); }

FunctionExplainer identity_explainer() {
  return FunctionExplainer("identity", [](const Model&, std::span<const double> x, std::size_t) {
    return std::vector<double>(x.begin(), x.end());
  });
}

FunctionExplainer constant_explainer() {
  return FunctionExplainer("const", [](const Model&, std::span<const double> x, std::size_t) {
    return std::vector<double>(x.size(), 1.0);
  });
}

// Dense sweep of the epsilon-circle around (1, 0): the largest half chord
// between x/|x| and (1, 0).
double circle_oracle(double eps, int steps) {
  double best = 0;
  for (int i = 0; i < steps; ++i) {
    const double phi = 2 * std::numbers::pi * i / steps;
    const double px = 1 + eps * std::cos(phi), py = eps * std::sin(phi);
    const double n = std::hypot(px, py);
    best = std::max(best, std::hypot(px / n - 1, py / n) / 2);
  }
  return best;
}

// O(n^2) average-rank Spearman, written independently of the library.
double spearman_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("LLE of a constant explainer is exactly zero") {
  PerturbationConfig cfg{0.1, 200, 1};
  auto e = constant_explainer();
  CHECK(lle_score(model2(), e, testing::instance("a", {1, 0}), cfg) == 0.0);
  CHECK(lle_score(model2(), e, testing::instance("b", {-3, 7}), cfg) == 0.0);
}

TEST_CASE("LLE of the unit-vector explainer matches the dense circle oracle") {
  const double oracle = circle_oracle(0.1, 200000);
  CHECK(std::abs(oracle - 0.0498) <= 0.002);

  PerturbationConfig cfg{0.1, 2000, 5};
  auto e = identity_explainer();
  const double lle = lle_score(model2(), e, testing::instance("u", {1, 0}), cfg);
  CHECK(std::abs(lle - 0.0498) <= 0.002);
  CHECK(lle <= oracle + 1e-12);
  CHECK(lle >= oracle - 1e-4);
}

TEST_CASE("LLE of a sign-flipping explainer is 1") {
  auto flip = FunctionExplainer("flip", [](const Model&, std::span<const double> x, std::size_t) {
    return x[1] >= 0 ? std::vector<double>{1, 0} : std::vector<double>{-1, 0};
  });
  PerturbationConfig cfg{0.1, 100, 2};
  CHECK(lle_score(model2(), flip, testing::instance("f", {1, 0}), cfg) == 1.0);
}

TEST_CASE("LLE stays in [0,1] over random draws") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 1);
  ExplainerSpec gi;
  auto g = make_explainer(gi);
  for (int i = 0; i < 300; ++i) {
    auto spec = i % 2 ? testing::random_linear(rng, 3, 5) : testing::random_mlp(rng, {5, 6, 3});
    Model m(spec);
    std::vector<double> x(5);
    for (auto& v : x) v = n(rng);
    PerturbationConfig cfg{0.05 + 0.5 * (i % 7), 20, static_cast<std::uint64_t>(i)};
    const double s = lle_score(m, *g, testing::instance("r" + std::to_string(i), x), cfg);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("LLE sampling is deterministic per seed and instance") {
  PerturbationConfig cfg{0.1, 50, 9};
  auto e = identity_explainer();
  auto inst = testing::instance("same", {1, 0.5});
  CHECK(lle_score(model2(), e, inst, cfg) == lle_score(model2(), e, inst, cfg));
  auto s1 = sphere_samples(3, cfg, "id"), s2 = sphere_samples(3, cfg, "id");
  CHECK(s1 == s2);
  for (const auto& v : s1) CHECK(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) == doctest::Approx(0.1));
  for (const auto& v : ball_samples(3, cfg, "id")) CHECK(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) <= 0.1 + 1e-12);
  CHECK(code_of([] { PerturbationConfig{0.0, 10, 0}.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("sensitivity") {
  PerturbationConfig cfg{0.1, 2000, 4};
  auto twice = FunctionExplainer("2x", [](const Model&, std::span<const double> x, std::size_t) {
    return std::vector<double>{2 * x[0], 2 * x[1]};
  });
  auto inst = testing::instance("s", {0.3, -0.2});
  const double mx = sensitivity(model2(), twice, inst, cfg, SensitivityMode::max);
  const double avg = sensitivity(model2(), twice, inst, cfg, SensitivityMode::avg);
  CHECK(std::abs(mx - 0.2) <= 0.01);
  CHECK(avg <= mx);
  auto c = constant_explainer();
  CHECK(sensitivity(model2(), c, inst, cfg, SensitivityMode::avg) == 0.0);
  CHECK(sensitivity(model2(), c, inst, cfg, SensitivityMode::max) == 0.0);
}

TEST_CASE("fidelity against ground truth") {
  auto f = fidelity_vs_gt(std::vector<double>{0.9, 0.8, 0.1, 0.0}, std::vector<double>{1, 0, 1, 0});
  CHECK(f.f1 == 0.5);
  CHECK(fidelity_vs_gt(std::vector<double>{0, 5, 0, 4}, std::vector<double>{0, 1, 0, 1}).f1 == 1.0);
  for (std::size_t d : {4u, 9u, 64u}) {
    for (std::size_t k = 1; k <= d; k += 3) {
      std::vector<double> gt(d, 0.0), a(d, 0.7);
      for (std::size_t i = 0; i < k; ++i) gt[(i * 5) % d] = 1;
      k = static_cast<std::size_t>(std::count(gt.begin(), gt.end(), 1.0));
      double dot = 0, na = 0, ng = 0;
      for (std::size_t i = 0; i < d; ++i) dot += a[i] * gt[i], na += a[i] * a[i], ng += gt[i] * gt[i];
      const double direct = dot / std::sqrt(na * ng);
      CHECK(direct == doctest::Approx(std::sqrt(double(k) / d)));
      CHECK(fidelity_vs_gt(a, gt).cosine == doctest::Approx(direct));
    }
  }
  CHECK(code_of([] { fidelity_vs_gt(std::vector<double>{1, 2}, std::vector<double>{0, 0}); }) ==
        ErrorCode::EmptyGroundTruth);
  CHECK(code_of([] { fidelity_vs_gt(std::vector<double>{1, 2}, std::vector<double>{1}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("complexity") {
  auto one_hot = complexity(std::vector<double>{0, 0, 5, 0}, 1);
  CHECK(one_hot.entropy == 0.0);
  CHECK(one_hot.topk_mass == 1.0);
  auto uniform = complexity(std::vector<double>{1, 1, 1, 1}, 1);
  CHECK(uniform.entropy == doctest::Approx(std::log(4.0)));
  CHECK(uniform.topk_mass == doctest::Approx(0.25));
  auto c = complexity(std::vector<double>{3, 1}, 1);
  CHECK(c.entropy == doctest::Approx(-0.75 * std::log(0.75) - 0.25 * std::log(0.25)));
  CHECK(c.entropy == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK(c.topk_mass == 0.75);
  CHECK(code_of([] { complexity(std::vector<double>{0, 0}, 1); }) == ErrorCode::AllZeroAttribution);
}

TEST_CASE("localisation") {
  CHECK(localisation(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 1, 1}) == doctest::Approx(0.7));
  CHECK(localisation(std::vector<double>{1, 2, 0, 0}, std::vector<double>{1, 1, 0, 0}) == 1.0);
  CHECK(localisation(std::vector<double>{1, 2, 0, 0}, std::vector<double>{0, 0, 1, 1}) == 0.0);
  CHECK(localisation(std::vector<double>{-1, 1}, std::vector<double>{1, 0}) == doctest::Approx(0.5));
}

TEST_CASE("spearman matches an independent oracle") {
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1, 1}) == 1.0);
  CHECK(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}) == 0.0);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> small(0, 4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(10), b(10);
    for (auto& v : a) v = small(rng);  // plenty of ties
    for (auto& v : b) v = small(rng);
    const double expect = spearman_oracle(a, b);
    if (std::isnan(expect)) continue;
    CHECK(spearman(a, b) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("randomisation check") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0, 1);
  Model model(testing::random_linear(rng, 2, 64));
  Dataset ds;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(64);
    for (auto& v : x) v = n(rng);
    ds.instances.push_back(testing::instance("i" + std::to_string(100 + i), x));
  }
  ExplainerSpec gi;
  auto r = randomisation_check(model, *make_explainer(gi), ds, 1234);
  CHECK(r.per_instance.size() == 50);
  CHECK(r.rho_mean >= -0.3);
  CHECK(r.rho_mean <= 0.3);
  CHECK(r.pass);

  auto c = constant_explainer();
  auto rc = randomisation_check(model, c, ds, 1234);
  CHECK(rc.rho_mean == 1.0);
  CHECK_FALSE(rc.pass);

  ExplainerSpec rnd;
  rnd.kind = ExplainerKind::random;
  CHECK_FALSE(randomisation_check(model, *make_explainer(rnd), ds, 1234).pass);
}

TEST_CASE("aggregate") {
  auto s = aggregate(std::vector<double>{0.082});
  CHECK(s.mean == 0.082);
  CHECK(s.std == 0.0);
  s = aggregate(std::vector<double>{0.0, 1.0});
  CHECK(s.mean == 0.5);
  CHECK(s.std == 0.5);
  auto byid = aggregate({{"b", 2.0}, {"a", 1.0}});
  CHECK(byid.per_instance.front().first == "a");
  CHECK(code_of([] { aggregate(std::vector<double>{}); }) == ErrorCode::EmptyInput);
  auto back = summary_from_json(summary_to_json(byid));
  CHECK(back.mean == byid.mean);
  CHECK(back.per_instance == byid.per_instance);
}

TEST_CASE("csv export") {
  std::vector<CsvRow> rows{{"a", "lle", 0.5}, {"b", "lle", 0.25}};
  auto csv = metrics_csv(rows);
  CHECK(csv.rfind("instance_id,metric,score\n", 0) == 0);
  CHECK(csv.find("a,lle,0.5") != std::string::npos);
}
