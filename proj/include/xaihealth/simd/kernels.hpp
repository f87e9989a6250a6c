#pragma once

// Double-precision vector kernels used by the model forward/backward passes
// and the attribution metrics. Each kernel has a scalar reference
// implementation and an AVX2+FMA variant; the variant is chosen once at
// startup from CPUID and may be pinned with XAIHEALTH_ISA=scalar|avx2 or
// set_isa() (tests use this to compare both paths on identical inputs).
//
// The variants differ only in summation order, so results agree to a few
// ULPs but are not bit-identical across ISAs. Within one ISA every call is
// deterministic.

#include <cstddef>
#include <span>
#include <string_view>

namespace xaihealth::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
Isa active_isa() noexcept;
// Returns false (and leaves the selection unchanged) when `isa` is not supported.
bool set_isa(Isa isa) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double sum_abs(std::span<const double> a) noexcept;
double sum_squares(std::span<const double> a) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
// out[r] = sum_c w[r*cols + c] * x[c] + bias[r]
void gemv(std::span<const double> w, std::span<const double> x, std::span<const double> bias,
          std::span<double> out) noexcept;

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum_abs(const double* a, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum_abs(const double* a, std::size_t n) noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace xaihealth::simd
