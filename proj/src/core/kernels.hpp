#pragma once

#include <cstdint>

namespace axf {

// Numeric inner loops with fixed accumulation order. Every result depends
// only on its own inputs and lengths, never on surrounding matrix sizes:
// streamed (prefix) and whole-match runs then agree bit-for-bit, which the
// stream/batch and causality contracts rely on. Lane-wise accumulators keep
// the order fixed while still vectorizing.

inline double dot(const double* a, const double* b, int64_t n) {
    constexpr int64_t kLanes = 8;
    double acc[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t i = 0;
    for (; i + kLanes <= n; i += kLanes)
        for (int64_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    double s = 0.0;
    for (int64_t l = 0; l < kLanes; ++l) s += acc[l];
    return s + tail;
}

// out[o] = sum_k x[k] * w[k*out_n + o]  (+ bias[o] if bias != nullptr)
// w row-major [in_n x out_n]; the k-loop is outermost so each out[o]
// accumulates in fixed k order.
inline void matvec_rowmajor(const double* x, const double* w, const double* bias, int64_t in_n, int64_t out_n,
                            double* out) {
    if (bias) {
        for (int64_t o = 0; o < out_n; ++o) out[o] = bias[o];
    } else {
        for (int64_t o = 0; o < out_n; ++o) out[o] = 0.0;
    }
    for (int64_t k = 0; k < in_n; ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const double* wrow = w + k * out_n;
        for (int64_t o = 0; o < out_n; ++o) out[o] += xk * wrow[o];
    }
}

// out[k] += sum_o g[o] * w[k*out_n + o]   (gradient w.r.t. x of matvec)
inline void matvec_rowmajor_backx(const double* g, const double* w, int64_t in_n, int64_t out_n, double* out) {
    for (int64_t k = 0; k < in_n; ++k) out[k] += dot(g, w + k * out_n, out_n);
}

// axpy: out[i] += s * v[i]
inline void axpy(double s, const double* v, int64_t n, double* out) {
    if (s == 0.0) return;
    for (int64_t i = 0; i < n; ++i) out[i] += s * v[i];
}

}  // namespace axf
