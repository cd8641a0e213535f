// Backend dispatch. A single table of function pointers, filled in once on
// first use from CPU feature detection; tests can pin a backend explicitly.

#include "ntkeq/simd.hpp"
#include "ntkeq/simd_backend.hpp"

#include <atomic>
#include <mutex>

namespace ntkeq::simd {

namespace {

struct Table {
    double (*dot_f64)(const double*, const double*, std::size_t);
    float (*dot_f32)(const float*, const float*, std::size_t);
    double (*sum_f64)(const double*, std::size_t);
    float (*sum_f32)(const float*, std::size_t);
    void (*axpy_f64)(double, const double*, double*, std::size_t);
    void (*axpy_f32)(float, const float*, float*, std::size_t);
    void (*scale_f64)(double, double*, std::size_t);
    void (*scale_f32)(float, float*, std::size_t);
    void (*relu_f64)(const double*, double*, std::size_t);
    void (*relu_f32)(const float*, float*, std::size_t);
    void (*relu_grad_f64)(const double*, const double*, double*, std::size_t);
    void (*relu_grad_f32)(const float*, const float*, float*, std::size_t);
    void (*abs_f64)(const double*, double*, std::size_t);
    void (*abs_f32)(const float*, float*, std::size_t);
    const char* name;
};

constexpr Table kScalar = {
    detail::dot_f64_scalar, detail::dot_f32_scalar,
    detail::sum_f64_scalar, detail::sum_f32_scalar,
    detail::axpy_f64_scalar, detail::axpy_f32_scalar,
    detail::scale_f64_scalar, detail::scale_f32_scalar,
    detail::relu_f64_scalar, detail::relu_f32_scalar,
    detail::relu_grad_f64_scalar, detail::relu_grad_f32_scalar,
    detail::abs_f64_scalar, detail::abs_f32_scalar,
    "scalar",
};

#if NTKEQ_SIMD_HAVE_AVX2_TU
constexpr Table kAvx2 = {
    detail::dot_f64_avx2, detail::dot_f32_avx2,
    detail::sum_f64_avx2, detail::sum_f32_avx2,
    detail::axpy_f64_avx2, detail::axpy_f32_avx2,
    detail::scale_f64_avx2, detail::scale_f32_avx2,
    detail::relu_f64_avx2, detail::relu_f32_avx2,
    detail::relu_grad_f64_avx2, detail::relu_grad_f32_avx2,
    detail::abs_f64_avx2, detail::abs_f32_avx2,
    "avx2",
};
#endif

bool cpu_has_avx2() {
#if NTKEQ_SIMD_HAVE_AVX2_TU
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<const Table*> g_table{nullptr};
std::once_flag g_init;

const Table* table() {
    const Table* t = g_table.load(std::memory_order_acquire);
    if (t) return t;
    std::call_once(g_init, [] {
        const Table* pick = &kScalar;
#if NTKEQ_SIMD_HAVE_AVX2_TU
        if (cpu_has_avx2()) pick = &kAvx2;
#endif
        g_table.store(pick, std::memory_order_release);
    });
    return g_table.load(std::memory_order_acquire);
}

}  // namespace

std::string_view active_backend() { return table()->name; }

bool force_backend(std::string_view name) {
    if (name == "scalar") {
        table();  // run the once-init so a later automatic pick can't race
        g_table.store(&kScalar, std::memory_order_release);
        return true;
    }
#if NTKEQ_SIMD_HAVE_AVX2_TU
    if (name == "avx2" && cpu_has_avx2()) {
        table();
        g_table.store(&kAvx2, std::memory_order_release);
        return true;
    }
#endif
    return false;
}

double dot_f64(const double* a, const double* b, std::size_t n) { return table()->dot_f64(a, b, n); }
float dot_f32(const float* a, const float* b, std::size_t n) { return table()->dot_f32(a, b, n); }
double sum_f64(const double* a, std::size_t n) { return table()->sum_f64(a, n); }
float sum_f32(const float* a, std::size_t n) { return table()->sum_f32(a, n); }
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) { table()->axpy_f64(alpha, x, y, n); }
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) { table()->axpy_f32(alpha, x, y, n); }
void scale_f64(double alpha, double* x, std::size_t n) { table()->scale_f64(alpha, x, n); }
void scale_f32(float alpha, float* x, std::size_t n) { table()->scale_f32(alpha, x, n); }
void relu_f64(const double* x, double* out, std::size_t n) { table()->relu_f64(x, out, n); }
void relu_f32(const float* x, float* out, std::size_t n) { table()->relu_f32(x, out, n); }
void relu_grad_f64(const double* z, const double* g, double* out, std::size_t n) { table()->relu_grad_f64(z, g, out, n); }
void relu_grad_f32(const float* z, const float* g, float* out, std::size_t n) { table()->relu_grad_f32(z, g, out, n); }
void abs_f64(const double* x, double* out, std::size_t n) { table()->abs_f64(x, out, n); }
void abs_f32(const float* x, float* out, std::size_t n) { table()->abs_f32(x, out, n); }

}  // namespace ntkeq::simd
