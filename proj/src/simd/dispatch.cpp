#include <atomic>
#include <cstdlib>
#include <cstring>

#include "xaihealth/simd/kernels.hpp"

namespace xaihealth::simd {
namespace {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  double (*sum_abs)(const double*, std::size_t) noexcept;
  double (*squared_distance)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
};

constexpr KernelTable kScalar{&scalar::dot, &scalar::sum_abs, &scalar::squared_distance, &scalar::axpy};
constexpr KernelTable kAvx2{&avx2::dot, &avx2::sum_abs, &avx2::squared_distance, &avx2::axpy};

bool cpu_has_avx2() noexcept {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() noexcept {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("XAIHEALTH_ISA")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2) return Isa::avx2;
  }
  return avx2 ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

const KernelTable& table() noexcept { return current().load(std::memory_order_relaxed) == Isa::avx2 ? kAvx2 : kScalar; }

}  // namespace

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) noexcept { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) noexcept {
  if (!isa_supported(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return table().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

double sum_abs(std::span<const double> a) noexcept { return table().sum_abs(a.data(), a.size()); }

double sum_squares(std::span<const double> a) noexcept { return table().dot(a.data(), a.data(), a.size()); }

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return table().squared_distance(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  table().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

void gemv(std::span<const double> w, std::span<const double> x, std::span<const double> bias,
          std::span<double> out) noexcept {
  const auto& k = table();
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = k.dot(w.data() + r * cols, x.data(), cols) + (bias.empty() ? 0.0 : bias[r]);
  }
}

}  // namespace xaihealth::simd
