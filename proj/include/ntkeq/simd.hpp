#pragma once
// Runtime-dispatched elementwise kernels: scalar reference implementations
// plus AVX2+FMA variants selected once at startup. All entry points tolerate
// unaligned pointers and any length.

#include <cstddef>
#include <string_view>

namespace ntkeq::simd {

// y[i] ~ accumulate / transform over contiguous arrays of length n.
double dot_f64(const double* a, const double* b, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
double sum_f64(const double* a, std::size_t n);
float sum_f32(const float* a, std::size_t n);

// y += alpha * x (FMA per element in both backends, so results are bitwise
// identical across backends).
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void axpy_f32(float alpha, const float* x, float* y, std::size_t n);

void scale_f64(double alpha, double* x, std::size_t n);
void scale_f32(float alpha, float* x, std::size_t n);

// out = max(x, 0)
void relu_f64(const double* x, double* out, std::size_t n);
void relu_f32(const float* x, float* out, std::size_t n);

// out = g * 1(z > 0); the derivative at exactly 0 is 0.
void relu_grad_f64(const double* z, const double* g, double* out, std::size_t n);
void relu_grad_f32(const float* z, const float* g, float* out, std::size_t n);

void abs_f64(const double* x, double* out, std::size_t n);
void abs_f32(const float* x, float* out, std::size_t n);

// Backend control. Dispatch happens lazily on first use; force_backend
// overrides it (tests use this to compare backends). Valid names: "scalar",
// "avx2". Forcing an unsupported backend returns false and keeps the current
// one.
std::string_view active_backend();
bool force_backend(std::string_view name);

// Convenience overloads so templated callers don't spell out the type.
inline double dot(const double* a, const double* b, std::size_t n) { return dot_f64(a, b, n); }
inline float dot(const float* a, const float* b, std::size_t n) { return dot_f32(a, b, n); }
inline double sum(const double* a, std::size_t n) { return sum_f64(a, n); }
inline float sum(const float* a, std::size_t n) { return sum_f32(a, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { axpy_f64(alpha, x, y, n); }
inline void axpy(float alpha, const float* x, float* y, std::size_t n) { axpy_f32(alpha, x, y, n); }
inline void scale(double alpha, double* x, std::size_t n) { scale_f64(alpha, x, n); }
inline void scale(float alpha, float* x, std::size_t n) { scale_f32(alpha, x, n); }
inline void relu(const double* x, double* out, std::size_t n) { relu_f64(x, out, n); }
inline void relu(const float* x, float* out, std::size_t n) { relu_f32(x, out, n); }
inline void relu_grad(const double* z, const double* g, double* out, std::size_t n) { relu_grad_f64(z, g, out, n); }
inline void relu_grad(const float* z, const float* g, float* out, std::size_t n) { relu_grad_f32(z, g, out, n); }
inline void abs(const double* x, double* out, std::size_t n) { abs_f64(x, out, n); }
inline void abs(const float* x, float* out, std::size_t n) { abs_f32(x, out, n); }

}  // namespace ntkeq::simd
