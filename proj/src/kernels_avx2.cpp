// Compiled with -mavx2 when the compiler targets x86-64; only entered after a
// runtime CPU check.
#include "habtox/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace habtox::kernels::avx2 {

#if defined(__AVX2__)

namespace {

inline double reduce(__m256d v) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, v);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

bool available() noexcept {
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
}

double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = reduce(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = reduce(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

#else

bool available() noexcept { return false; }

double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  return scalar::squared_distance(a, b, n);
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
  return scalar::dot(a, b, n);
}

#endif

}  // namespace habtox::kernels::avx2
