// AVX2/FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// only linked in on x86_64; the dispatcher checks cpu support before use.

#include "adspoi/kernels.hpp"

#ifdef ADSPOI_HAVE_AVX2

#include <immintrin.h>

namespace adspoi::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_avx2(const double* W, std::size_t m, std::size_t n,
                 const double* x, double* out) {
  for (std::size_t i = 0; i < m; ++i) out[i] = dot_avx2(W + i * n, x, n);
}

void matvec_t_add_avx2(const double* W, std::size_t m, std::size_t n,
                       const double* v, double* out) {
  for (std::size_t i = 0; i < m; ++i) axpy_avx2(out, v[i], W + i * n, n);
}

void ger_avx2(double* A, std::size_t m, std::size_t n, const double* u,
              const double* v) {
  for (std::size_t i = 0; i < m; ++i) axpy_avx2(A + i * n, u[i], v, n);
}

}  // namespace

const Ops avx2_ops = {dot_avx2, axpy_avx2, matvec_avx2, matvec_t_add_avx2,
                      ger_avx2};

}  // namespace adspoi::kernels

#endif  // ADSPOI_HAVE_AVX2
