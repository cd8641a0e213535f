// Scalar reference kernels. These define the semantics; the AVX2 variants
// must agree bitwise for the non-accumulating ops and to rounding noise for
// the reductions (different summation order).

#include "ntkeq/simd_backend.hpp"

#include <cmath>

namespace ntkeq::simd::detail {

double dot_f64_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}

float dot_f32_scalar(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc = std::fmaf(a[i], b[i], acc);
    return acc;
}

double sum_f64_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

float sum_f32_scalar(const float* a, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void axpy_f64_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void axpy_f32_scalar(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fmaf(alpha, x[i], y[i]);
}

void scale_f64_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void scale_f32_scalar(float alpha, float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void relu_f64_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_f32_scalar(const float* x, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_grad_f64_scalar(const double* z, const double* g, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] > 0.0 ? g[i] : 0.0;
}

void relu_grad_f32_scalar(const float* z, const float* g, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] > 0.0f ? g[i] : 0.0f;
}

void abs_f64_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(x[i]);
}

void abs_f32_scalar(const float* x, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(x[i]);
}

}  // namespace ntkeq::simd::detail
