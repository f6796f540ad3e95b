#pragma once

// Differentiable tensor operations. Each op computes its output with the
// active kernel backend and records a closure that scatters gradients back
// to its inputs. Convolutions lower to im2col + GEMM; the patch matrix is
// rebuilt in the backward pass instead of being stored.

#include <cmath>
#include <vector>

#include "mgiad/autodiff.hpp"
#include "mgiad/conv.hpp"
#include "mgiad/kernels.hpp"
#include "mgiad/tensor.hpp"

namespace mgiad::ops {

namespace detail {

// Patch row layout k = (ic_local*kh + ki)*kw + kj, which is exactly the
// row-major layout of one weight filter (out_ch, in_ch/g, kh, kw). The
// forward conv is then gemm_nt(patches, weights) per group.
template <typename T>
void im2col_group(const T* x, std::int64_t h, std::int64_t w, const ConvGeom& g, int grp,
                  T* patches) {
  const int icg = g.in_per_group();
  const int khkw = g.kh * g.kw;
  const std::int64_t K = static_cast<std::int64_t>(icg) * khkw;
  auto [oh, ow] = g.out_hw(h, w);
  const T* xg = x + static_cast<std::int64_t>(grp) * icg;
  for (std::int64_t oi = 0; oi < oh; ++oi)
    for (std::int64_t oj = 0; oj < ow; ++oj) {
      T* row = patches + (oi * ow + oj) * K;
      std::fill(row, row + K, T(0));
      for (int ki = 0; ki < g.kh; ++ki) {
        const std::int64_t ii = oi * g.stride - g.pad_h + ki;
        if (ii < 0 || ii >= h) continue;
        for (int kj = 0; kj < g.kw; ++kj) {
          const std::int64_t jj = oj * g.stride - g.pad_w + kj;
          if (jj < 0 || jj >= w) continue;
          const T* px = xg + (ii * w + jj) * g.in_ch;
          T* dst = row + ki * g.kw + kj;
          for (int ic = 0; ic < icg; ++ic) dst[static_cast<std::int64_t>(ic) * khkw] = px[ic];
        }
      }
    }
}

// Scatter-add of patch gradients back onto the input image.
template <typename T>
void col2im_group_add(const T* patches, std::int64_t h, std::int64_t w, const ConvGeom& g,
                      int grp, T* dx) {
  const int icg = g.in_per_group();
  const int khkw = g.kh * g.kw;
  const std::int64_t K = static_cast<std::int64_t>(icg) * khkw;
  auto [oh, ow] = g.out_hw(h, w);
  T* dxg = dx + static_cast<std::int64_t>(grp) * icg;
  for (std::int64_t oi = 0; oi < oh; ++oi)
    for (std::int64_t oj = 0; oj < ow; ++oj) {
      const T* row = patches + (oi * ow + oj) * K;
      for (int ki = 0; ki < g.kh; ++ki) {
        const std::int64_t ii = oi * g.stride - g.pad_h + ki;
        if (ii < 0 || ii >= h) continue;
        for (int kj = 0; kj < g.kw; ++kj) {
          const std::int64_t jj = oj * g.stride - g.pad_w + kj;
          if (jj < 0 || jj >= w) continue;
          T* px = dxg + (ii * w + jj) * g.in_ch;
          const T* src = row + ki * g.kw + kj;
          for (int ic = 0; ic < icg; ++ic) px[ic] += src[static_cast<std::int64_t>(ic) * khkw];
        }
      }
    }
}

inline bool is_pointwise(const ConvGeom& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0;
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const ConvGeom& g, Tensor<T>& out) {
  const auto& k = kernels::active<T>();
  const std::int64_t b = x.dim(0), h = x.dim(1), wd = x.dim(2);
  auto [oh, ow] = g.out_hw(h, wd);
  const std::int64_t M = oh * ow;
  const int icg = g.in_per_group(), ocg = g.out_per_group();
  const std::int64_t K = static_cast<std::int64_t>(icg) * g.kh * g.kw;
  std::vector<T> patches;
  if (!is_pointwise(g)) patches.resize(static_cast<std::size_t>(M * K));
  for (std::int64_t n = 0; n < b; ++n) {
    const T* xn = x.ptr() + n * h * wd * g.in_ch;
    T* on = out.ptr() + n * M * g.out_ch;
    for (int grp = 0; grp < g.groups; ++grp) {
      const T* wg = w.ptr() + static_cast<std::int64_t>(grp) * ocg * K;
      if (is_pointwise(g)) {
        k.gemm_nt(M, ocg, K, xn + static_cast<std::int64_t>(grp) * icg, g.in_ch, wg, K,
                  on + static_cast<std::int64_t>(grp) * ocg, g.out_ch, false);
      } else {
        im2col_group(xn, h, wd, g, grp, patches.data());
        k.gemm_nt(M, ocg, K, patches.data(), K, wg, K, on + static_cast<std::int64_t>(grp) * ocg,
                  g.out_ch, false);
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvGeom& g,
                     const Tensor<T>& dout, Tensor<T>* dx, Tensor<T>* dw) {
  const auto& k = kernels::active<T>();
  const std::int64_t b = x.dim(0), h = x.dim(1), wd = x.dim(2);
  auto [oh, ow] = g.out_hw(h, wd);
  const std::int64_t M = oh * ow;
  const int icg = g.in_per_group(), ocg = g.out_per_group();
  const std::int64_t K = static_cast<std::int64_t>(icg) * g.kh * g.kw;
  const bool pointwise = is_pointwise(g);
  std::vector<T> patches, dpatches;
  if (!pointwise) {
    patches.resize(static_cast<std::size_t>(M * K));
    if (dx) dpatches.resize(static_cast<std::size_t>(M * K));
  }
  for (std::int64_t n = 0; n < b; ++n) {
    const T* xn = x.ptr() + n * h * wd * g.in_ch;
    const T* don = dout.ptr() + n * M * g.out_ch;
    for (int grp = 0; grp < g.groups; ++grp) {
      const T* dog = don + static_cast<std::int64_t>(grp) * ocg;
      if (pointwise) {
        const T* pg = xn + static_cast<std::int64_t>(grp) * icg;
        if (dw)
          k.gemm_at_b(ocg, K, M, dog, g.out_ch, pg, g.in_ch,
                      dw->ptr() + static_cast<std::int64_t>(grp) * ocg * K, K, true);
        if (dx)
          k.gemm_nn(M, K, ocg, dog, g.out_ch, w.ptr() + static_cast<std::int64_t>(grp) * ocg * K, K,
                    dx->ptr() + n * h * wd * g.in_ch + static_cast<std::int64_t>(grp) * icg,
                    g.in_ch, true);
      } else {
        im2col_group(xn, h, wd, g, grp, patches.data());
        if (dw)
          k.gemm_at_b(ocg, K, M, dog, g.out_ch, patches.data(), K,
                      dw->ptr() + static_cast<std::int64_t>(grp) * ocg * K, K, true);
        if (dx) {
          k.gemm_nn(M, K, ocg, dog, g.out_ch, w.ptr() + static_cast<std::int64_t>(grp) * ocg * K, K,
                    dpatches.data(), K, false);
          col2im_group_add(dpatches.data(), h, wd, g, grp, dx->ptr() + n * h * wd * g.in_ch);
        }
      }
    }
  }
}

template <typename T>
void finite_check(const Tape<T>& tape, const NodePtr<T>& n, const char* what) {
  if (tape.check_finite && !n->value.all_finite())
    throw UsageError(std::string("non-finite values after ") + what);
}

}  // namespace detail

template <typename T>
NodePtr<T> conv2d(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const ConvGeom& g) {
  g.validate_input(x->value.shape);
  if (w->value.shape != g.weight_shape())
    throw ConfigError("conv2d: weight shape " + shape_str(w->value.shape) + " vs expected " +
                      shape_str(g.weight_shape()));
  auto [oh, ow] = g.out_hw(x->value.dim(1), x->value.dim(2));
  auto out = tape.node(Tensor<T>::zeros({x->value.dim(0), oh, ow, g.out_ch}));
  detail::conv2d_forward(x->value, w->value, g, out->value);
  detail::finite_check(tape, out, "conv2d");
  tape.record([x, w, g, out] {
    detail::conv2d_backward(x->value, w->value, g, out->grad,
                            x->requires_grad ? &x->grad : nullptr,
                            w->requires_grad ? &w->grad : nullptr);
  });
  return out;
}

template <typename T>
NodePtr<T> add(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
  if (a->value.shape != b->value.shape)
    throw ConfigError("add: shape mismatch " + shape_str(a->value.shape) + " vs " +
                      shape_str(b->value.shape));
  auto out = tape.node(Tensor<T>::zeros(a->value.shape));
  const auto& k = kernels::active<T>();
  k.vadd(a->value.ptr(), b->value.ptr(), out->value.ptr(), out->value.data.size());
  tape.record([a, b, out] {
    const auto& kk = kernels::active<T>();
    if (a->requires_grad) kk.axpy(T(1), out->grad.ptr(), a->grad.ptr(), a->grad.data.size());
    if (b->requires_grad) kk.axpy(T(1), out->grad.ptr(), b->grad.ptr(), b->grad.data.size());
  });
  return out;
}

template <typename T>
NodePtr<T> sub(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
  if (a->value.shape != b->value.shape)
    throw ConfigError("sub: shape mismatch " + shape_str(a->value.shape) + " vs " +
                      shape_str(b->value.shape));
  auto out = tape.node(Tensor<T>::zeros(a->value.shape));
  const auto& k = kernels::active<T>();
  k.vsub(a->value.ptr(), b->value.ptr(), out->value.ptr(), out->value.data.size());
  tape.record([a, b, out] {
    const auto& kk = kernels::active<T>();
    if (a->requires_grad) kk.axpy(T(1), out->grad.ptr(), a->grad.ptr(), a->grad.data.size());
    if (b->requires_grad) kk.axpy(T(-1), out->grad.ptr(), b->grad.ptr(), b->grad.data.size());
  });
  return out;
}

template <typename T>
NodePtr<T> relu(Tape<T>& tape, const NodePtr<T>& x) {
  auto out = tape.node(Tensor<T>::zeros(x->value.shape));
  const auto& k = kernels::active<T>();
  k.relu(x->value.ptr(), out->value.ptr(), x->value.data.size());
  tape.record([x, out] {
    if (!x->requires_grad) return;
    kernels::active<T>().relu_grad(x->value.ptr(), out->grad.ptr(), x->grad.ptr(),
                                   x->value.data.size());
  });
  return out;
}

// Per-channel batch statistics live in the layer that owns gamma/beta; the
// op updates the running estimates in train mode and reads them in eval.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T eps = T(1e-5);
  T momentum = T(0.1);

  explicit BatchNormState(std::int64_t channels = 1)
      : running_mean(Tensor<T>::zeros({channels})), running_var(Tensor<T>::full({channels}, T(1))) {}
};

template <typename T>
NodePtr<T> batch_norm(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& gamma,
                      const NodePtr<T>& beta, BatchNormState<T>& state, bool train) {
  const Shape& s = x->value.shape;
  if (s.size() != 4) throw ConfigError("batch_norm: expected NHWC input, got " + shape_str(s));
  const std::int64_t c = s[3];
  if (gamma->value.numel() != c || beta->value.numel() != c ||
      state.running_mean.numel() != c)
    throw ConfigError("batch_norm: parameter length does not match " + std::to_string(c) +
                      " channels");
  const std::int64_t rows = s[0] * s[1] * s[2];
  const auto& k = kernels::active<T>();

  auto mean = std::make_shared<Tensor<T>>(Tensor<T>::zeros({c}));
  auto invstd = std::make_shared<Tensor<T>>(Tensor<T>::zeros({c}));
  Tensor<T> sc = Tensor<T>::zeros({c}), sh = Tensor<T>::zeros({c});

  if (train) {
    Tensor<T> var = Tensor<T>::zeros({c});
    for (std::int64_t r = 0; r < rows; ++r)
      k.axpy(T(1), x->value.ptr() + r * c, mean->ptr(), static_cast<std::size_t>(c));
    k.scale(T(1) / T(rows), mean->ptr(), static_cast<std::size_t>(c));
    for (std::int64_t r = 0; r < rows; ++r)
      k.vfma(x->value.ptr() + r * c, x->value.ptr() + r * c, var.ptr(), static_cast<std::size_t>(c));
    for (std::int64_t i = 0; i < c; ++i) {
      auto iu = static_cast<std::size_t>(i);
      var.data[iu] = var.data[iu] / T(rows) - mean->data[iu] * mean->data[iu];
      if (var.data[iu] < T(0)) var.data[iu] = T(0);  // rounding guard
      invstd->data[iu] = T(1) / std::sqrt(var.data[iu] + state.eps);
      state.running_mean.data[iu] =
          (T(1) - state.momentum) * state.running_mean.data[iu] + state.momentum * mean->data[iu];
      state.running_var.data[iu] =
          (T(1) - state.momentum) * state.running_var.data[iu] + state.momentum * var.data[iu];
      sc.data[iu] = gamma->value.data[iu] * invstd->data[iu];
      sh.data[iu] = beta->value.data[iu] - mean->data[iu] * sc.data[iu];
    }
  } else {
    for (std::int64_t i = 0; i < c; ++i) {
      auto iu = static_cast<std::size_t>(i);
      mean->data[iu] = state.running_mean.data[iu];
      invstd->data[iu] = T(1) / std::sqrt(state.running_var.data[iu] + state.eps);
      sc.data[iu] = gamma->value.data[iu] * invstd->data[iu];
      sh.data[iu] = beta->value.data[iu] - mean->data[iu] * sc.data[iu];
    }
  }

  auto out = tape.node(Tensor<T>::zeros(s));
  for (std::int64_t r = 0; r < rows; ++r)
    k.vmuladd(x->value.ptr() + r * c, sc.ptr(), sh.ptr(), out->value.ptr() + r * c,
              static_cast<std::size_t>(c));
  detail::finite_check(tape, out, "batch_norm");

  tape.record([x, gamma, beta, out, mean, invstd, rows, c, train] {
    const std::int64_t n = rows;
    Tensor<T> dgamma = Tensor<T>::zeros({c}), dbeta = Tensor<T>::zeros({c});
    std::vector<T> xhat(static_cast<std::size_t>(c));
    for (std::int64_t r = 0; r < n; ++r) {
      const T* xr = x->value.ptr() + r * c;
      const T* gr = out->grad.ptr() + r * c;
      for (std::int64_t i = 0; i < c; ++i) {
        auto iu = static_cast<std::size_t>(i);
        xhat[iu] = (xr[i] - mean->data[iu]) * invstd->data[iu];
        dbeta.data[iu] += gr[i];
        dgamma.data[iu] += gr[i] * xhat[iu];
      }
    }
    if (gamma->requires_grad)
      kernels::active<T>().axpy(T(1), dgamma.ptr(), gamma->grad.ptr(), static_cast<std::size_t>(c));
    if (beta->requires_grad)
      kernels::active<T>().axpy(T(1), dbeta.ptr(), beta->grad.ptr(), static_cast<std::size_t>(c));
    if (!x->requires_grad) return;
    if (!train) {
      // eval statistics are constants: dx = dy * gamma * invstd
      for (std::int64_t r = 0; r < n; ++r) {
        const T* gr = out->grad.ptr() + r * c;
        T* dxr = x->grad.ptr() + r * c;
        for (std::int64_t i = 0; i < c; ++i) {
          auto iu = static_cast<std::size_t>(i);
          dxr[i] += gr[i] * gamma->value.data[iu] * invstd->data[iu];
        }
      }
      return;
    }
    for (std::int64_t r = 0; r < n; ++r) {
      const T* xr = x->value.ptr() + r * c;
      const T* gr = out->grad.ptr() + r * c;
      T* dxr = x->grad.ptr() + r * c;
      for (std::int64_t i = 0; i < c; ++i) {
        auto iu = static_cast<std::size_t>(i);
        const T xh = (xr[i] - mean->data[iu]) * invstd->data[iu];
        dxr[i] += gamma->value.data[iu] * invstd->data[iu] *
                  (gr[i] - dbeta.data[iu] / T(n) - xh * dgamma.data[iu] / T(n));
      }
    }
  });
  return out;
}

template <typename T>
NodePtr<T> global_avg_pool(Tape<T>& tape, const NodePtr<T>& x) {
  const Shape& s = x->value.shape;
  if (s.size() != 4) throw ConfigError("global_avg_pool: expected NHWC input, got " + shape_str(s));
  const std::int64_t b = s[0], px = s[1] * s[2], c = s[3];
  auto out = tape.node(Tensor<T>::zeros({b, c}));
  const auto& k = kernels::active<T>();
  for (std::int64_t n = 0; n < b; ++n) {
    T* on = out->value.ptr() + n * c;
    for (std::int64_t r = 0; r < px; ++r)
      k.axpy(T(1), x->value.ptr() + (n * px + r) * c, on, static_cast<std::size_t>(c));
    k.scale(T(1) / T(px), on, static_cast<std::size_t>(c));
  }
  tape.record([x, out, b, px, c] {
    if (!x->requires_grad) return;
    const auto& kk = kernels::active<T>();
    for (std::int64_t n = 0; n < b; ++n)
      for (std::int64_t r = 0; r < px; ++r)
        kk.axpy(T(1) / T(px), out->grad.ptr() + n * c, x->grad.ptr() + (n * px + r) * c,
                static_cast<std::size_t>(c));
  });
  return out;
}

// scores = x * W^T + bias, with x (b, c), W (classes, c).
template <typename T>
NodePtr<T> linear(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& bias) {
  const std::int64_t b = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t classes = w->value.dim(0);
  if (w->value.dim(1) != c || bias->value.numel() != classes)
    throw ConfigError("linear: weight " + shape_str(w->value.shape) + " / bias " +
                      shape_str(bias->value.shape) + " incompatible with input " +
                      shape_str(x->value.shape));
  auto out = tape.node(Tensor<T>::zeros({b, classes}));
  const auto& k = kernels::active<T>();
  k.gemm_nt(b, classes, c, x->value.ptr(), c, w->value.ptr(), c, out->value.ptr(), classes, false);
  for (std::int64_t n = 0; n < b; ++n)
    k.axpy(T(1), bias->value.ptr(), out->value.ptr() + n * classes,
           static_cast<std::size_t>(classes));
  tape.record([x, w, bias, out, b, c, classes] {
    const auto& kk = kernels::active<T>();
    if (w->requires_grad)
      kk.gemm_at_b(classes, c, b, out->grad.ptr(), classes, x->value.ptr(), c, w->grad.ptr(), c,
                   true);
    if (bias->requires_grad)
      for (std::int64_t n = 0; n < b; ++n)
        kk.axpy(T(1), out->grad.ptr() + n * classes, bias->grad.ptr(),
                static_cast<std::size_t>(classes));
    if (x->requires_grad)
      kk.gemm_nn(b, c, classes, out->grad.ptr(), classes, w->value.ptr(), c, x->grad.ptr(), c,
                 true);
  });
  return out;
}

template <typename T>
NodePtr<T> sum_all(Tape<T>& tape, const NodePtr<T>& x) {
  auto out = tape.node(Tensor<T>::zeros({1}));
  out->value.data[0] = kernels::active<T>().sum(x->value.ptr(), x->value.data.size());
  tape.record([x, out] {
    if (!x->requires_grad) return;
    const T g = out->grad.data[0];
    for (auto& v : x->grad.data) v += g;
  });
  return out;
}

// Mean softmax cross-entropy over the batch.
template <typename T>
NodePtr<T> softmax_cross_entropy(Tape<T>& tape, const NodePtr<T>& logits,
                                 const std::vector<int>& labels) {
  const std::int64_t b = logits->value.dim(0), classes = logits->value.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b)
    throw ConfigError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                      std::to_string(b));
  auto probs = std::make_shared<Tensor<T>>(Tensor<T>::zeros({b, classes}));
  auto out = tape.node(Tensor<T>::zeros({1}));
  double total = 0.0;
  for (std::int64_t n = 0; n < b; ++n) {
    const T* row = logits->value.ptr() + n * classes;
    const int y = labels[static_cast<std::size_t>(n)];
    if (y < 0 || y >= classes)
      throw ConfigError("cross_entropy: label " + std::to_string(y) + " out of range");
    T m = row[0];
    for (std::int64_t j = 1; j < classes; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < classes; ++j) z += std::exp(static_cast<double>(row[j] - m));
    const double lse = static_cast<double>(m) + std::log(z);
    for (std::int64_t j = 0; j < classes; ++j)
      probs->data[static_cast<std::size_t>(n * classes + j)] =
          static_cast<T>(std::exp(static_cast<double>(row[j]) - lse));
    total += lse - static_cast<double>(row[y]);
  }
  out->value.data[0] = static_cast<T>(total / static_cast<double>(b));
  tape.record([logits, out, probs, labels, b, classes] {
    if (!logits->requires_grad) return;
    const T g = out->grad.data[0] / T(b);
    for (std::int64_t n = 0; n < b; ++n) {
      T* drow = logits->grad.ptr() + n * classes;
      const T* prow = probs->ptr() + n * classes;
      const int y = labels[static_cast<std::size_t>(n)];
      for (std::int64_t j = 0; j < classes; ++j) drow[j] += g * (prow[j] - (j == y ? T(1) : T(0)));
    }
  });
  return out;
}

}  // namespace mgiad::ops
