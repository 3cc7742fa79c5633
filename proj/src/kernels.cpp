#include "evolt/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "evolt/errors.hpp"

namespace evolt::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void matvec_scalar(const double* w, const double* x, const double* b,
                   double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double s = b ? b[r] : 0.0;
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
        y[r] = s;
    }
}

void matvec_t_scalar(const double* w, const double* v, double* y,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        const double vr = v[r];
        for (std::size_t c = 0; c < cols; ++c) y[c] += vr * wr[c];
    }
}

void ger_acc_scalar(double alpha, const double* u, const double* v,
                    double* a, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = alpha * u[r];
        double* ar = a + r * cols;
        for (std::size_t c = 0; c < cols; ++c) ar[c] += ur * v[c];
    }
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* pre, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!(pre[i] > 0.0)) g[i] = 0.0;
    }
}

double sq_err_sum_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void adam_step_scalar(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] * bc1;
        const double vhat = v[i] * bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

constexpr Ops kScalarOps = {
    "scalar",
    dot_scalar,
    axpy_scalar,
    matvec_scalar,
    matvec_t_scalar,
    ger_acc_scalar,
    relu_scalar,
    relu_backward_scalar,
    sq_err_sum_scalar,
    adam_step_scalar,
};

std::atomic<const Ops*> g_active{nullptr};

const Ops* pick_default() {
    if (const char* env = std::getenv("EVOLT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2_supported())
                throw ConfigError("EVOLT_KERNELS=avx2 but this host does not support AVX2+FMA");
            return &avx2_ops();
        }
        if (std::strcmp(env, "auto") != 0)
            throw ConfigError(std::string("unknown EVOLT_KERNELS value '") + env +
                              "' (expected scalar|avx2|auto)");
    }
    return avx2_supported() ? &avx2_ops() : &scalar_ops();
}

}  // namespace

const Ops& scalar_ops() { return kScalarOps; }

#ifndef EVOLT_HAVE_AVX2
bool avx2_supported() { return false; }
const Ops& avx2_ops() { return kScalarOps; }
#endif

const Ops& active() {
    const Ops* p = g_active.load(std::memory_order_acquire);
    if (p == nullptr) {
        p = pick_default();
        g_active.store(p, std::memory_order_release);
    }
    return *p;
}

void select(Backend b) {
    switch (b) {
        case Backend::automatic:
            g_active.store(avx2_supported() ? &avx2_ops() : &scalar_ops(),
                           std::memory_order_release);
            return;
        case Backend::scalar:
            g_active.store(&scalar_ops(), std::memory_order_release);
            return;
        case Backend::avx2:
            if (!avx2_supported()) throw InvalidInput("AVX2 kernels not supported on this host");
            g_active.store(&avx2_ops(), std::memory_order_release);
            return;
    }
    throw InvalidInput("unknown kernel backend");
}

}  // namespace evolt::kernels
