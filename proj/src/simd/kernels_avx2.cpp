// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// CPUID check.

#include "xaihealth/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define XAIHEALTH_HAVE_AVX2_TU 1
#endif

namespace xaihealth::simd::avx2 {

#ifdef XAIHEALTH_HAVE_AVX2_TU

namespace {

inline double hsum(__m256d v) noexcept {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline __m256d abs_pd(__m256d v) noexcept {
  const __m256d sign = _mm256_set1_pd(-0.0);
  return _mm256_andnot_pd(sign, v);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_abs(const double* a, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, abs_pd(_mm256_loadu_pd(a + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] < 0 ? -a[i] : a[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

#else

double dot(const double* a, const double* b, std::size_t n) noexcept { return scalar::dot(a, b, n); }
double sum_abs(const double* a, std::size_t n) noexcept { return scalar::sum_abs(a, n); }
double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  return scalar::squared_distance(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept { scalar::axpy(alpha, x, y, n); }

#endif

}  // namespace xaihealth::simd::avx2
