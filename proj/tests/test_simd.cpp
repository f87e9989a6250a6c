#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "xaihealth/simd/kernels.hpp"

using namespace xaihealth;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Reassociation error bound for a length-n sum of |terms|.
double tol(double magnitude, std::size_t n) { return 1e-14 * magnitude * static_cast<double>(n + 1) + 1e-300; }

struct IsaGuard {
  simd::Isa saved = simd::active_isa();
  ~IsaGuard() { simd::set_isa(saved); }
};

}  // namespace

TEST_CASE("scalar and avx2 kernels agree") {
  if (!simd::isa_supported(simd::Isa::avx2)) {
    MESSAGE("avx2 not available; equivalence test skipped");
    return;
  }
  IsaGuard guard;
  std::mt19937_64 rng(3);
  // Lengths around the 4-lane boundary plus a large one.
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 63u, 64u, 1001u}) {
    auto a = random_vec(rng, n), b = random_vec(rng, n);
    double mag = 0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]) + a[i] * a[i] + std::abs(a[i]);

    REQUIRE(simd::set_isa(simd::Isa::scalar));
    const double dot_s = simd::dot(a, b), abs_s = simd::sum_abs(a), sq_s = simd::sum_squares(a),
                 dist_s = simd::squared_distance(a, b);
    auto axpy_s = b;
    simd::axpy(0.75, a, axpy_s);

    REQUIRE(simd::set_isa(simd::Isa::avx2));
    CHECK(std::abs(simd::dot(a, b) - dot_s) <= tol(mag, n));
    CHECK(std::abs(simd::sum_abs(a) - abs_s) <= tol(mag, n));
    CHECK(std::abs(simd::sum_squares(a) - sq_s) <= tol(mag, n));
    CHECK(std::abs(simd::squared_distance(a, b) - dist_s) <= tol(4 * mag + 400.0 * n, n));
    auto axpy_v = b;
    simd::axpy(0.75, a, axpy_v);
    for (std::size_t i = 0; i < n; ++i) CHECK(axpy_v[i] == doctest::Approx(axpy_s[i]).epsilon(1e-15));
  }
}

TEST_CASE("gemv agrees across isas") {
  if (!simd::isa_supported(simd::Isa::avx2)) return;
  IsaGuard guard;
  std::mt19937_64 rng(5);
  for (auto [rows, cols] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 3}, {10, 64}, {7, 129}}) {
    auto w = random_vec(rng, rows * cols), x = random_vec(rng, cols), bias = random_vec(rng, rows);
    std::vector<double> out_s(rows), out_v(rows);
    simd::set_isa(simd::Isa::scalar);
    simd::gemv(w, x, bias, out_s);
    simd::set_isa(simd::Isa::avx2);
    simd::gemv(w, x, bias, out_v);
    for (std::size_t r = 0; r < rows; ++r) CHECK(out_v[r] == doctest::Approx(out_s[r]).epsilon(1e-12));
  }
}

TEST_CASE("scalar kernels match direct loops") {
  IsaGuard guard;
  simd::set_isa(simd::Isa::scalar);
  std::vector<double> a{1, -2, 3}, b{4, 5, -6};
  CHECK(simd::dot(a, b) == -24.0);
  CHECK(simd::sum_abs(a) == 6.0);
  CHECK(simd::sum_squares(a) == 14.0);
  CHECK(simd::squared_distance(a, b) == 9.0 + 49.0 + 81.0);
  CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
  CHECK(simd::isa_supported(simd::Isa::scalar));
}
