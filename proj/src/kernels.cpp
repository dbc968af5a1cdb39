// Runtime backend dispatch for the dense kernels.

#include "adspoi/kernels.hpp"

#include <cstdlib>

namespace adspoi::kernels {

namespace {

bool avx2_available() {
#if defined(ADSPOI_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct State {
  const Ops* ops;
  Backend backend;
};

State pick_initial() {
  const char* env = std::getenv("ADSPOI_KERNELS");
  std::string want = env ? env : "auto";
#ifdef ADSPOI_HAVE_AVX2
  if (want != "scalar" && avx2_available()) return {&avx2_ops, Backend::Avx2};
#endif
  return {&scalar_ops, Backend::Scalar};
}

State& state() {
  static State s = pick_initial();
  return s;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  return state().ops->dot(a, b, n);
}
void axpy(double* y, double alpha, const double* x, std::size_t n) {
  state().ops->axpy(y, alpha, x, n);
}
void matvec(const double* W, std::size_t m, std::size_t n, const double* x,
            double* out) {
  state().ops->matvec(W, m, n, x, out);
}
void matvec_t_add(const double* W, std::size_t m, std::size_t n,
                  const double* v, double* out) {
  state().ops->matvec_t_add(W, m, n, v, out);
}
void ger(double* A, std::size_t m, std::size_t n, const double* u,
         const double* v) {
  state().ops->ger(A, m, n, u, v);
}

Backend active() { return state().backend; }

const char* name() {
  return state().backend == Backend::Avx2 ? "avx2" : "scalar";
}

bool select(const std::string& want) {
  if (want == "scalar") {
    state() = {&scalar_ops, Backend::Scalar};
    return true;
  }
#ifdef ADSPOI_HAVE_AVX2
  if ((want == "avx2" || want == "auto") && avx2_available()) {
    state() = {&avx2_ops, Backend::Avx2};
    return true;
  }
#endif
  if (want == "auto") {
    state() = {&scalar_ops, Backend::Scalar};
    return true;
  }
  return false;
}

}  // namespace adspoi::kernels
