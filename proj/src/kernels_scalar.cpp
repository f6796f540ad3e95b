// Scalar reference kernels. These define the semantics every other backend
// must reproduce (up to floating-point reassociation in the reductions).

#include "mgiad/kernels.hpp"

namespace mgiad::kernels {
namespace {

template <typename T>
T dot_(const T* a, const T* b, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
void axpy_(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale_(T a, T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
void vadd_(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vsub_(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void vmul_(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void vmuladd_(const T* x, const T* sc, const T* sh, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * sc[i] + sh[i];
}

template <typename T>
void vfma_(const T* a, const T* b, T* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

template <typename T>
void relu_(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_grad_(const T* x, const T* g, T* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i] > T(0) ? g[i] : T(0);
}

template <typename T>
T sum_(const T* x, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T sumsq_(const T* x, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

template <typename T>
void sgd_momentum_(T* p, const T* g, T* v, T lr, T mu, T wd, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] + g[i] + wd * p[i];
    p[i] -= lr * v[i];
  }
}

template <typename T>
void gemm_nt_(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
              const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* ai = A + i * lda;
    T* ci = C + i * ldc;
    for (std::size_t j = 0; j < N; ++j) {
      T s = dot_(ai, B + j * ldb, K);
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

template <typename T>
void gemm_nn_(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
              const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc) {
  for (std::size_t i = 0; i < M; ++i) {
    T* ci = C + i * ldc;
    if (!acc)
      for (std::size_t j = 0; j < N; ++j) ci[j] = 0;
    const T* ai = A + i * lda;
    for (std::size_t k = 0; k < K; ++k) axpy_(ai[k], B + k * ldb, ci, N);
  }
}

template <typename T>
void gemm_at_b_(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
                const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc) {
  if (!acc)
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j) C[i * ldc + j] = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const T* ak = A + k * lda;
    const T* bk = B + k * ldb;
    for (std::size_t i = 0; i < M; ++i) axpy_(ak[i], bk, C + i * ldc, N);
  }
}

template <typename T>
KernelTable<T> make_table() {
  KernelTable<T> t;
  t.name = "scalar";
  t.dot = dot_<T>;
  t.axpy = axpy_<T>;
  t.scale = scale_<T>;
  t.vadd = vadd_<T>;
  t.vsub = vsub_<T>;
  t.vmul = vmul_<T>;
  t.vmuladd = vmuladd_<T>;
  t.vfma = vfma_<T>;
  t.relu = relu_<T>;
  t.relu_grad = relu_grad_<T>;
  t.sum = sum_<T>;
  t.sumsq = sumsq_<T>;
  t.sgd_momentum = sgd_momentum_<T>;
  t.gemm_nt = gemm_nt_<T>;
  t.gemm_nn = gemm_nn_<T>;
  t.gemm_at_b = gemm_at_b_<T>;
  return t;
}

}  // namespace

template <>
const KernelTable<float>& scalar_table<float>() {
  static const KernelTable<float> t = make_table<float>();
  return t;
}

template <>
const KernelTable<double>& scalar_table<double>() {
  static const KernelTable<double> t = make_table<double>();
  return t;
}

}  // namespace mgiad::kernels
