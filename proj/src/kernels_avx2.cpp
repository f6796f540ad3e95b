// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here runs unless the dispatcher confirmed CPU
// support at startup.

#include "mgiad/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace mgiad::kernels {
namespace {

struct VF {
  using reg = __m256;
  static constexpr std::size_t W = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float a) { return _mm256_set1_ps(a); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
  }
};

struct VD {
  using reg = __m256d;
  static constexpr std::size_t W = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double a) { return _mm256_set1_pd(a); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    lo = _mm_hadd_pd(lo, lo);
    return _mm_cvtsd_f64(lo);
  }
};

template <typename T> struct vec_of;
template <> struct vec_of<float> { using type = VF; };
template <> struct vec_of<double> { using type = VD; };

template <typename T>
T dot_(const T* a, const T* b, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg acc0 = V::zero(), acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * V::W <= n; i += 2 * V::W) {
    acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
    acc1 = V::fmadd(V::load(a + i + V::W), V::load(b + i + V::W), acc1);
  }
  for (; i + V::W <= n; i += V::W) acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
  T s = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
void axpy_(T a, const T* x, T* y, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg av = V::set1(a);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale_(T a, T* x, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg av = V::set1(a);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(x + i, V::mul(av, V::load(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

template <typename T>
void vadd_(const T* a, const T* b, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::add(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vsub_(const T* a, const T* b, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::sub(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void vmul_(const T* a, const T* b, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::mul(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void vmuladd_(const T* x, const T* sc, const T* sh, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W)
    V::store(out + i, V::fmadd(V::load(x + i), V::load(sc + i), V::load(sh + i)));
  for (; i < n; ++i) out[i] = x[i] * sc[i] + sh[i];
}

template <typename T>
void vfma_(const T* a, const T* b, T* acc, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W)
    V::store(acc + i, V::fmadd(V::load(a + i), V::load(b + i), V::load(acc + i)));
  for (; i < n; ++i) acc[i] += a[i] * b[i];
}

template <typename T>
void relu_(const T* x, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg z = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::max(V::load(x + i), z));
  for (; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_grad_(const T* x, const T* g, T* acc, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg z = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    typename V::reg mask = V::gt_mask(V::load(x + i), z);
    V::store(acc + i, V::add(V::load(acc + i), V::and_(mask, V::load(g + i))));
  }
  for (; i < n; ++i) acc[i] += x[i] > T(0) ? g[i] : T(0);
}

template <typename T>
T sum_(const T* x, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg acc = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) acc = V::add(acc, V::load(x + i));
  T s = V::hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T sumsq_(const T* x, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg acc = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    typename V::reg v = V::load(x + i);
    acc = V::fmadd(v, v, acc);
  }
  T s = V::hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

template <typename T>
void sgd_momentum_(T* p, const T* g, T* v, T lr, T mu, T wd, std::size_t n) {
  using V = typename vec_of<T>::type;
  typename V::reg lrv = V::set1(lr), muv = V::set1(mu), wdv = V::set1(wd);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    typename V::reg pv = V::load(p + i);
    typename V::reg vv = V::fmadd(muv, V::load(v + i), V::fmadd(wdv, pv, V::load(g + i)));
    V::store(v + i, vv);
    V::store(p + i, V::sub(pv, V::mul(lrv, vv)));
  }
  for (; i < n; ++i) {
    v[i] = mu * v[i] + g[i] + wd * p[i];
    p[i] -= lr * v[i];
  }
}

// One A row against four B rows at a time; K-loop keeps 4 independent
// accumulators per B row pair to hide FMA latency.
template <typename T>
void gemm_nt_(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
              const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc) {
  using V = typename vec_of<T>::type;
  for (std::size_t i = 0; i < M; ++i) {
    const T* ai = A + i * lda;
    T* ci = C + i * ldc;
    std::size_t j = 0;
    for (; j + 4 <= N; j += 4) {
      const T* b0 = B + j * ldb;
      const T* b1 = b0 + ldb;
      const T* b2 = b1 + ldb;
      const T* b3 = b2 + ldb;
      typename V::reg s0 = V::zero(), s1 = V::zero(), s2 = V::zero(), s3 = V::zero();
      std::size_t k = 0;
      for (; k + V::W <= K; k += V::W) {
        typename V::reg av = V::load(ai + k);
        s0 = V::fmadd(av, V::load(b0 + k), s0);
        s1 = V::fmadd(av, V::load(b1 + k), s1);
        s2 = V::fmadd(av, V::load(b2 + k), s2);
        s3 = V::fmadd(av, V::load(b3 + k), s3);
      }
      T r0 = V::hsum(s0), r1 = V::hsum(s1), r2 = V::hsum(s2), r3 = V::hsum(s3);
      for (; k < K; ++k) {
        T av = ai[k];
        r0 += av * b0[k];
        r1 += av * b1[k];
        r2 += av * b2[k];
        r3 += av * b3[k];
      }
      if (acc) {
        ci[j] += r0;
        ci[j + 1] += r1;
        ci[j + 2] += r2;
        ci[j + 3] += r3;
      } else {
        ci[j] = r0;
        ci[j + 1] = r1;
        ci[j + 2] = r2;
        ci[j + 3] = r3;
      }
    }
    for (; j < N; ++j) {
      T s = dot_(ai, B + j * ldb, K);
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

template <typename T>
void gemm_nn_(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda,
              const T* B, std::size_t ldb, T* C, std::size_t ldc, bool acc) {
  using V = typename vec_of<T>::type;
  for (std::size_t i = 0; i < M; ++i) {
    T* ci = C + i * ldc;
    if (!acc)
      for (std::size_t j = 0; j < N; ++j) ci[j] = 0;
    const T* ai = A + i * lda;
    std::size_t k = 0;
    for (; k + 4 <= K; k += 4) {
      typename V::reg a0 = V::set1(ai[k]), a1 = V::set1(ai[k + 1]);
      typename V::reg a2 = V::set1(ai[k + 2]), a3 = V::set1(ai[k + 3]);
      const T* b0 = B + k * ldb;
      const T* b1 = b0 + ldb;
      const T* b2 = b1 + ldb;
      const T* b3 = b2 + ldb;
      std::size_t j = 0;
      for (; j + V::W <= N; j += V::W) {
        typename V::reg cv = V::load(ci + j);
        cv = V::fmadd(a0, V::load(b0 + j), cv);
        cv = V::fmadd(a1, V::load(b1 + j), cv);
        cv = V::fmadd(a2, V::load(b2 + j), cv);
        cv = V::fmadd(a3, V::load(b3 + j), cv);
        V::store(ci + j, cv);
      }
      for (; j < N; ++j)
        ci[j] += ai[k] * b0[j] + ai[k + 1] * b1[j] + ai[k + 2] * b2[j] + ai[k + 3] * b3[j];
    }
    for (; k < K; ++k) axpy_(ai[k], B + k * ldb, ci, N);
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
  t.name = "avx2";
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
const KernelTable<float>* avx2_table<float>() {
  if (!cpu_has_avx2()) return nullptr;
  static const KernelTable<float> t = make_table<float>();
  return &t;
}

template <>
const KernelTable<double>* avx2_table<double>() {
  if (!cpu_has_avx2()) return nullptr;
  static const KernelTable<double> t = make_table<double>();
  return &t;
}

}  // namespace mgiad::kernels

#else  // no AVX2 at compile time

namespace mgiad::kernels {

template <>
const KernelTable<float>* avx2_table<float>() { return nullptr; }

template <>
const KernelTable<double>* avx2_table<double>() { return nullptr; }

}  // namespace mgiad::kernels

#endif
