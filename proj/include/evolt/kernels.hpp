#pragma once

#include <cstddef>

namespace evolt::kernels {

// f64 primitives behind the network hot loops. There is one scalar reference
// table and, on x86-64, an AVX2+FMA table selected at runtime. The two are
// equivalence-tested against each other; results may differ in the last few
// ulps because the vector paths reassociate reductions and use fused
// multiply-add.
struct Ops {
    const char* name;

    double (*dot)(const double* x, const double* y, std::size_t n);

    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    // y = W x + b; W is rows x cols row-major; b may be null.
    void (*matvec)(const double* w, const double* x, const double* b,
                   double* y, std::size_t rows, std::size_t cols);

    // y = W^T v; v has rows entries, y has cols entries (overwritten).
    void (*matvec_t)(const double* w, const double* v, double* y,
                     std::size_t rows, std::size_t cols);

    // A += alpha * u v^T; A is rows x cols row-major.
    void (*ger_acc)(double alpha, const double* u, const double* v,
                    double* a, std::size_t rows, std::size_t cols);

    void (*relu)(const double* x, double* y, std::size_t n);

    // g[i] = pre[i] > 0 ? g[i] : 0
    void (*relu_backward)(const double* pre, double* g, std::size_t n);

    double (*sq_err_sum)(const double* a, const double* b, std::size_t n);

    // One Adam update with bias corrections bc1 = 1/(1-beta1^t),
    // bc2 = 1/(1-beta2^t) precomputed by the caller.
    void (*adam_step)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2);
};

enum class Backend { automatic, scalar, avx2 };

const Ops& scalar_ops();

// False on non-x86 builds and on x86 hosts without AVX2+FMA.
bool avx2_supported();
// Only valid to dispatch through when avx2_supported().
const Ops& avx2_ops();

// Active table. Chosen on first use: EVOLT_KERNELS=scalar|avx2|auto when set,
// otherwise the widest supported backend.
const Ops& active();

// Override the active table (used by tests and benchmarks).
void select(Backend b);

}  // namespace evolt::kernels
