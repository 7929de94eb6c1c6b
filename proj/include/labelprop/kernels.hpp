#pragma once

// Dispatchable numeric primitives used by the dense math in this project.
//
// Every primitive has a scalar reference implementation plus SIMD variants
// (AVX2+FMA on x86-64, NEON on aarch64). The backend is picked once at
// runtime from CPU capabilities and can be overridden with the
// LABELPROP_KERNELS environment variable ("scalar", "avx2", "neon", "auto")
// or programmatically via select_backend(). SIMD variants are
// equivalence-tested against the scalar reference; they may differ from it
// by reassociation/FMA rounding, so results are backend-dependent at the
// ulp level but bit-reproducible for a fixed backend.

#include <cstddef>
#include <string_view>

namespace labelprop::kern {

struct Ops {
    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x[i] *= alpha
    void (*scale)(double* x, double alpha, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    // One Adam update over n coordinates.
    //   m = beta1*m + (1-beta1)*g
    //   v = beta2*v + (1-beta2)*g^2
    //   param -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
    // bias1/bias2 are the bias-correction denominators 1-beta1^t, 1-beta2^t.
    void (*adam_step)(double* param, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
};

extern const Ops scalar_ops;

#if defined(__x86_64__) || defined(_M_X64)
#define LABELPROP_HAVE_AVX2_KERNELS 1
extern const Ops avx2_ops;
#endif

#if defined(__aarch64__)
#define LABELPROP_HAVE_NEON_KERNELS 1
extern const Ops neon_ops;
#endif

// Currently active backend (selected on first use).
const Ops& active();
std::string_view backend_name();

// Force a backend by name; returns false if it is unavailable on this CPU.
// "auto" restores capability-based selection.
bool select_backend(std::string_view name);

inline double dot(const double* a, const double* b, std::size_t n) {
    return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active().axpy(alpha, x, y, n);
}
inline void scale(double* x, double alpha, std::size_t n) {
    active().scale(x, alpha, n);
}
inline double sum(const double* x, std::size_t n) {
    return active().sum(x, n);
}
inline void adam_step(double* param, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2) {
    active().adam_step(param, m, v, g, n, lr, beta1, beta2, eps, bias1, bias2);
}

}  // namespace labelprop::kern
