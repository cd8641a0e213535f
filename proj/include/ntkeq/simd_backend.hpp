#pragma once
// Internal declarations shared by the simd backends and the dispatcher.
// Not part of the public surface; include ntkeq/simd.hpp instead.

#include <cstddef>

namespace ntkeq::simd::detail {

double dot_f64_scalar(const double*, const double*, std::size_t);
float dot_f32_scalar(const float*, const float*, std::size_t);
double sum_f64_scalar(const double*, std::size_t);
float sum_f32_scalar(const float*, std::size_t);
void axpy_f64_scalar(double, const double*, double*, std::size_t);
void axpy_f32_scalar(float, const float*, float*, std::size_t);
void scale_f64_scalar(double, double*, std::size_t);
void scale_f32_scalar(float, float*, std::size_t);
void relu_f64_scalar(const double*, double*, std::size_t);
void relu_f32_scalar(const float*, float*, std::size_t);
void relu_grad_f64_scalar(const double*, const double*, double*, std::size_t);
void relu_grad_f32_scalar(const float*, const float*, float*, std::size_t);
void abs_f64_scalar(const double*, double*, std::size_t);
void abs_f32_scalar(const float*, float*, std::size_t);

#if defined(__x86_64__) || defined(_M_X64)
#define NTKEQ_SIMD_HAVE_AVX2_TU 1
double dot_f64_avx2(const double*, const double*, std::size_t);
float dot_f32_avx2(const float*, const float*, std::size_t);
double sum_f64_avx2(const double*, std::size_t);
float sum_f32_avx2(const float*, std::size_t);
void axpy_f64_avx2(double, const double*, double*, std::size_t);
void axpy_f32_avx2(float, const float*, float*, std::size_t);
void scale_f64_avx2(double, double*, std::size_t);
void scale_f32_avx2(float, float*, std::size_t);
void relu_f64_avx2(const double*, double*, std::size_t);
void relu_f32_avx2(const float*, float*, std::size_t);
void relu_grad_f64_avx2(const double*, const double*, double*, std::size_t);
void relu_grad_f32_avx2(const float*, const float*, float*, std::size_t);
void abs_f64_avx2(const double*, double*, std::size_t);
void abs_f32_avx2(const float*, float*, std::size_t);
#else
#define NTKEQ_SIMD_HAVE_AVX2_TU 0
#endif

}  // namespace ntkeq::simd::detail
