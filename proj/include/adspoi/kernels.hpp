#pragma once
// Dense double-precision kernels used by the model's inner loops.
// A scalar reference implementation is always available; an AVX2 variant is
// selected at runtime when the CPU supports it (override with the
// ADSPOI_KERNELS env var or select()).

#include <cstddef>
#include <string>

namespace adspoi::kernels {

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double* y, double alpha, const double* x, std::size_t n);

// out = W * x, W row-major m x n
void matvec(const double* W, std::size_t m, std::size_t n, const double* x,
            double* out);

// out += W^T * v, W row-major m x n, v length m, out length n
void matvec_t_add(const double* W, std::size_t m, std::size_t n,
                  const double* v, double* out);

// A += u * v^T, A row-major m x n
void ger(double* A, std::size_t m, std::size_t n, const double* u,
         const double* v);

enum class Backend { Scalar, Avx2 };

Backend active();
const char* name();

// "scalar", "avx2" or "auto". Returns false (and leaves the backend
// unchanged) if the requested backend is unavailable on this machine.
bool select(const std::string& want);

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
  void (*matvec)(const double*, std::size_t, std::size_t, const double*,
                 double*);
  void (*matvec_t_add)(const double*, std::size_t, std::size_t, const double*,
                       double*);
  void (*ger)(double*, std::size_t, std::size_t, const double*, const double*);
};

extern const Ops scalar_ops;
#ifdef ADSPOI_HAVE_AVX2
extern const Ops avx2_ops;
#endif

}  // namespace adspoi::kernels
