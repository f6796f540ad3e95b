#pragma once

// Arithmetic kernels behind the tensor engine. Every kernel has a scalar
// reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant. The active backend is chosen once at startup (overridable via
// set_backend() or the MGIAD_KERNELS environment variable) and the two
// implementations are equivalence-tested against each other.

#include <cstddef>

namespace mgiad::kernels {

// GEMM conventions (all row-major, ld* = leading dimension / row stride):
//   gemm_nt:   C[M x N] = A[M x K] * B[N x K]^T      C[i,j] = sum_k A[i,k] B[j,k]
//   gemm_nn:   C[M x N] = A[M x K] * B[K x N]        C[i,j] = sum_k A[i,k] B[k,j]
//   gemm_at_b: C[M x N] = A[K x M]^T * B[K x N]      C[i,j] = sum_k A[k,i] B[k,j]
// With acc=true the product is added onto C instead of overwriting it.
template <typename T>
struct KernelTable {
  const char* name;

  T (*dot)(const T* a, const T* b, std::size_t n);
  void (*axpy)(T a, const T* x, T* y, std::size_t n);  // y += a*x
  void (*scale)(T a, T* x, std::size_t n);
  void (*vadd)(const T* a, const T* b, T* out, std::size_t n);
  void (*vsub)(const T* a, const T* b, T* out, std::size_t n);
  void (*vmul)(const T* a, const T* b, T* out, std::size_t n);
  // out = x * scale + shift (per-element scale/shift vectors)
  void (*vmuladd)(const T* x, const T* scale, const T* shift, T* out, std::size_t n);
  void (*vfma)(const T* a, const T* b, T* acc, std::size_t n);  // acc += a*b
  void (*relu)(const T* x, T* out, std::size_t n);
  void (*relu_grad)(const T* x, const T* g, T* acc, std::size_t n);  // acc += g*(x>0)
  T (*sum)(const T* x, std::size_t n);
  T (*sumsq)(const T* x, std::size_t n);
  // v = mu*v + (g + wd*p); p -= lr*v
  void (*sgd_momentum)(T* p, const T* g, T* v, T lr, T mu, T wd, std::size_t n);

  void (*gemm_nt)(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc);
  void (*gemm_nn)(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                  const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc);
  void (*gemm_at_b)(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                    const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc);
};

template <typename T>
const KernelTable<T>& scalar_table();

// Null when the binary was built without AVX2 support or the CPU lacks it.
template <typename T>
const KernelTable<T>* avx2_table();

template <typename T>
const KernelTable<T>& active();

// "scalar", "avx2" or "auto". Throws std::invalid_argument on unknown names
// or when forcing avx2 on a machine without it.
void set_backend(const char* name);
const char* active_backend_name();

bool cpu_has_avx2();

}  // namespace mgiad::kernels
