#include "ntkeq/blasx.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <cstdlib>
#include <stdexcept>
#include <vector>

#ifdef __linux__
#include <unistd.h>
#endif

extern "C" void openblas_set_num_threads(int);

namespace ntkeq::blasx {

void ensure_fast_blas(int argc, char** argv) {
#if defined(__linux__) && defined(__x86_64__)
    // Guard against exec loops: the variable below is set before re-exec.
    if (std::getenv("NTKEQ_BLAS_BOOTSTRAPPED") == nullptr &&
        std::getenv("OPENBLAS_CORETYPE") == nullptr &&
        __builtin_cpu_supports("avx512f")) {
        // OpenBLAS's runtime detector picks a generic (slow) kernel on this
        // family of cores; the SKYLAKEX path is ~3x faster and exercises the
        // same AVX-512 units. Must be in the environment before the library
        // constructor runs, hence the re-exec.
        ::setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 1);
        ::setenv("NTKEQ_BLAS_BOOTSTRAPPED", "1", 1);
        std::vector<char*> args(argv, argv + argc);
        args.push_back(nullptr);
        ::execv("/proc/self/exe", args.data());
        // exec failed: fall through and run with whatever kernel was picked.
    }
#endif
    (void)argc;
    (void)argv;
    openblas_set_num_threads(1);
}

namespace {
CBLAS_TRANSPOSE flag(bool t) { return t ? CblasTrans : CblasNoTrans; }
}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
    cblas_dgemm(CblasRowMajor, flag(trans_a), flag(trans_b), (int)m, (int)n, (int)k,
                alpha, a, (int)lda, b, (int)ldb, beta, c, (int)ldc);
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc) {
    cblas_sgemm(CblasRowMajor, flag(trans_a), flag(trans_b), (int)m, (int)n, (int)k,
                alpha, a, (int)lda, b, (int)ldb, beta, c, (int)ldc);
}

void gemv(std::size_t m, std::size_t n, double alpha, const double* a, std::size_t lda,
          const double* x, double beta, double* y) {
    cblas_dgemv(CblasRowMajor, CblasNoTrans, (int)m, (int)n, alpha, a, (int)lda, x, 1, beta, y, 1);
}

void gemv(std::size_t m, std::size_t n, float alpha, const float* a, std::size_t lda,
          const float* x, float beta, float* y) {
    cblas_sgemv(CblasRowMajor, CblasNoTrans, (int)m, (int)n, alpha, a, (int)lda, x, 1, beta, y, 1);
}

bool solve_spd(std::vector<double> a_copy, std::size_t n, double shift,
               const double* b, double* x) {
    for (std::size_t i = 0; i < n; ++i) a_copy[i * n + i] += shift;
    std::vector<double> rhs(b, b + n);
    lapack_int info = LAPACKE_dposv(LAPACK_ROW_MAJOR, 'L', (lapack_int)n, 1,
                                    a_copy.data(), (lapack_int)n, rhs.data(), 1);
    if (info < 0) throw std::runtime_error("solve_spd: bad argument to dposv");
    if (info > 0) return false;  // not positive definite
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i];
    return true;
}

std::vector<double> sym_eigenvalues(std::vector<double> a_copy, std::size_t n) {
    std::vector<double> w(n);
    lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'N', 'L', (lapack_int)n,
                                     a_copy.data(), (lapack_int)n, w.data());
    if (info != 0) throw std::runtime_error("sym_eigenvalues: dsyevd failed");
    return w;
}

void sym_eigen(std::vector<double>& a_inout, std::size_t n, std::vector<double>& eigvals) {
    eigvals.assign(n, 0.0);
    lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'V', 'L', (lapack_int)n,
                                     a_inout.data(), (lapack_int)n, eigvals.data());
    if (info != 0) throw std::runtime_error("sym_eigen: dsyevd failed");
}

}  // namespace ntkeq::blasx
