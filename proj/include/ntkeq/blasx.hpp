#pragma once
// Thin row-major GEMM/GEMV/eig wrappers over BLAS/LAPACK plus a startup
// helper that pins a sane OpenBLAS kernel. Heavy math goes through these so
// precision (f32 training hot path vs f64 analysis) is a template parameter
// at the call site.

#include <cstddef>
#include <vector>

namespace ntkeq::blasx {

// OpenBLAS picks its microkernel from a load-time constructor, so the
// environment must be right before main() runs. When the selector variable
// is unset and the CPU supports AVX-512, re-exec the process once with
// OPENBLAS_CORETYPE pinned; otherwise do nothing. Call first thing in main()
// of performance-sensitive binaries. Also caps BLAS threads at 1 (dispatch
// overhead dominates at our matrix sizes on a single-core host).
void ensure_fast_blas(int argc, char** argv);

// Row-major C(m x n) = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc);

// y(m) = alpha * A(m x n) * x + beta * y, row-major.
void gemv(std::size_t m, std::size_t n, double alpha, const double* a, std::size_t lda,
          const double* x, double beta, double* y);
void gemv(std::size_t m, std::size_t n, float alpha, const float* a, std::size_t lda,
          const float* x, float beta, float* y);

// Solves (A + shift*I) x = b for symmetric positive definite A (n x n,
// row-major, full storage). Tries Cholesky; returns false if the shifted
// matrix is not numerically PD (caller falls back to the eigen route).
bool solve_spd(std::vector<double> a_copy, std::size_t n, double shift,
               const double* b, double* x);

// Eigenvalues (ascending) of a symmetric matrix; optionally eigenvectors
// (row-major, row i = i-th eigenvector on exit of the underlying routine's
// column convention transposed). Throws on LAPACK failure.
std::vector<double> sym_eigenvalues(std::vector<double> a_copy, std::size_t n);
void sym_eigen(std::vector<double>& a_inout, std::size_t n, std::vector<double>& eigvals);

}  // namespace ntkeq::blasx
