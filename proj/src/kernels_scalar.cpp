// Scalar reference kernels. Plain sequential loops; the AVX2 variants are
// equivalence-tested against these.

#include "adspoi/kernels.hpp"

namespace adspoi::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_scalar(const double* W, std::size_t m, std::size_t n,
                   const double* x, double* out) {
  for (std::size_t i = 0; i < m; ++i) out[i] = dot_scalar(W + i * n, x, n);
}

void matvec_t_add_scalar(const double* W, std::size_t m, std::size_t n,
                         const double* v, double* out) {
  for (std::size_t i = 0; i < m; ++i) axpy_scalar(out, v[i], W + i * n, n);
}

void ger_scalar(double* A, std::size_t m, std::size_t n, const double* u,
                const double* v) {
  for (std::size_t i = 0; i < m; ++i) axpy_scalar(A + i * n, u[i], v, n);
}

}  // namespace

const Ops scalar_ops = {dot_scalar, axpy_scalar, matvec_scalar,
                        matvec_t_add_scalar, ger_scalar};

}  // namespace adspoi::kernels
