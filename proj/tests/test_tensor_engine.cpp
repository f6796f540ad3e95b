#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "mgiad/conv.hpp"
#include "mgiad/ops.hpp"
#include "mgiad/rng.hpp"

using namespace mgiad;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, scale));
  return t;
}

std::vector<double> flatten_sample(const Tensor<double>& x, std::int64_t n) {
  const std::int64_t per = x.numel() / x.dim(0);
  return {x.data.begin() + n * per, x.data.begin() + (n + 1) * per};
}

double max_abs(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Convolution output vs the materialized matrix acting on the flattened input.
double conv_vs_matrix(const ConvGeom& g, std::int64_t h, std::int64_t w, Rng& rng) {
  Tape<double> tape;
  auto x = tape.node(random_tensor<double>({2, h, w, g.in_ch}, rng), false);
  auto wt = tape.node(random_tensor<double>(g.weight_shape(), rng), false);
  auto y = ops::conv2d(tape, x, wt, g);
  auto m = conv_as_matrix(g, wt->value, h, w);
  double worst = 0;
  for (std::int64_t n = 0; n < 2; ++n) {
    auto yd = dense::matvec(m, flatten_sample(x->value, n));
    worst = std::max(worst, max_abs(yd, flatten_sample(y->value, n)));
  }
  return worst;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  ConvGeom g{.kh = 1, .kw = 1, .in_ch = 3, .out_ch = 3};
  Tensor<double> w(g.weight_shape());
  for (int i = 0; i < 3; ++i) w.data[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  Tape<double> tape;
  Rng rng(1);
  auto x = tape.node(random_tensor<double>({2, 5, 4, 3}, rng));
  auto y = ops::conv2d(tape, x, tape.node(std::move(w)), g);
  CHECK(y->value.shape == x->value.shape);
  for (std::size_t i = 0; i < x->value.data.size(); ++i)
    CHECK(y->value.data[i] == doctest::Approx(x->value.data[i]).epsilon(1e-15));
}

TEST_CASE("conv2d equals dense matrix oracle (3x3, pad 1)") {
  Rng rng(2);
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 2, .out_ch = 2, .pad_h = 1, .pad_w = 1};
  CHECK(conv_vs_matrix(g, 4, 4, rng) < 1e-12);
}

TEST_CASE("conv2d matrix oracle sweep: dense/grouped/depthwise/strided") {
  Rng rng(3);
  int cases = 0;
  for (int trial = 0; trial < 60; ++trial) {
    int kh = rng.uniform_int(0, 1) ? 3 : 1;
    int kw = rng.uniform_int(0, 2) == 0 ? 1 : kh;
    int groups = static_cast<int>(std::array{1, 1, 2, 4}[rng.uniform_int(0, 3)]);
    int icg = static_cast<int>(rng.uniform_int(1, 3));
    int ocg = static_cast<int>(rng.uniform_int(1, 3));
    if (rng.uniform_int(0, 4) == 0) {  // depthwise case
      groups = static_cast<int>(rng.uniform_int(2, 4));
      icg = 1;
      ocg = 1;
    }
    ConvGeom g{.kh = kh,
               .kw = kw,
               .in_ch = groups * icg,
               .out_ch = groups * ocg,
               .groups = groups,
               .stride = static_cast<int>(rng.uniform_int(1, 2)),
               .pad_h = kh / 2,
               .pad_w = kw / 2};
    std::int64_t h = rng.uniform_int(3, 6), w = rng.uniform_int(3, 6);
    CHECK(conv_vs_matrix(g, h, w, rng) < 1e-12);
    ++cases;
  }
  CHECK(cases >= 50);
}

TEST_CASE("grouped conv equals independent convs on channel halves") {
  Rng rng(4);
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 4, .out_ch = 4, .groups = 2, .pad_h = 1, .pad_w = 1};
  Tensor<double> w = random_tensor<double>(g.weight_shape(), rng);
  Tensor<double> x = random_tensor<double>({1, 5, 5, 4}, rng);

  Tape<double> tape;
  auto y = ops::conv2d(tape, tape.node(x), tape.node(w), g);

  // oracle: run each half as its own dense conv and concatenate channels
  ConvGeom gh{.kh = 3, .kw = 3, .in_ch = 2, .out_ch = 2, .pad_h = 1, .pad_w = 1};
  for (int half = 0; half < 2; ++half) {
    Tensor<double> xh({1, 5, 5, 2});
    for (std::int64_t p = 0; p < 25; ++p)
      for (int c = 0; c < 2; ++c) xh.data[static_cast<std::size_t>(p * 2 + c)] = x.data[static_cast<std::size_t>(p * 4 + half * 2 + c)];
    Tensor<double> wh(gh.weight_shape());  // per-group weight block: 2 out x 2 in x 3 x 3
    std::copy(w.data.begin() + half * 36, w.data.begin() + (half + 1) * 36, wh.data.begin());
    Tape<double> th;
    auto yh = ops::conv2d(th, th.node(std::move(xh)), th.node(std::move(wh)), gh);
    for (std::int64_t p = 0; p < 25; ++p)
      for (int c = 0; c < 2; ++c)
        CHECK(y->value.data[static_cast<std::size_t>(p * 4 + half * 2 + c)] ==
              doctest::Approx(yh->value.data[static_cast<std::size_t>(p * 2 + c)]).epsilon(1e-13));
  }
}

TEST_CASE("conv_as_matrix: depthwise 1x1 on a single pixel is diagonal") {
  ConvGeom g{.kh = 1, .kw = 1, .in_ch = 3, .out_ch = 3, .groups = 3};
  Tensor<double> w(g.weight_shape());
  w.data = {2.0, -1.0, 0.5};
  auto m = conv_as_matrix(g, w, 1, 1);
  REQUIRE(m.rows() == 3);
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      CHECK(m(i, j) == (i == j ? w.data[static_cast<std::size_t>(i)] : 0.0));
}

TEST_CASE("conv_as_matrix: 3x3 Laplacian stencil gives the banded 25x25 matrix") {
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 1, .out_ch = 1, .pad_h = 1, .pad_w = 1};
  Tensor<double> w(g.weight_shape());
  w.data = {0, -1, 0, -1, 4, -1, 0, -1, 0};
  auto m = conv_as_matrix(g, w, 5, 5);
  REQUIRE(m.rows() == 25);
  REQUIRE(m.cols() == 25);
  // hand-built five-point operator on the 5x5 grid with zero padding
  dense::Matrix ref(25, 25);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      int r = i * 5 + j;
      ref(r, r) = 4.0;
      if (i > 0) ref(r, r - 5) = -1.0;
      if (i < 4) ref(r, r + 5) = -1.0;
      if (j > 0) ref(r, r - 1) = -1.0;
      if (j < 4) ref(r, r + 1) = -1.0;
    }
  CHECK(dense::max_abs_diff(m, ref) == 0.0);
  // interior rows sum to the stencil sum (= 0)
  for (int i = 1; i < 4; ++i)
    for (int j = 1; j < 4; ++j) {
      double s = 0;
      for (std::int64_t col = 0; col < 25; ++col) s += m(i * 5 + j, col);
      CHECK(s == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("conv_as_matrix: grouped 1x1 is block-diagonal, safety bound enforced") {
  ConvGeom g{.kh = 1, .kw = 1, .in_ch = 2, .out_ch = 2, .groups = 2};
  Tensor<double> w(g.weight_shape());
  w.data = {3.0, 7.0};
  auto m = conv_as_matrix(g, w, 1, 1);
  CHECK(m(0, 0) == 3.0);
  CHECK(m(1, 1) == 7.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 0) == 0.0);

  ConvGeom big{.kh = 3, .kw = 3, .in_ch = 8, .out_ch = 8, .pad_h = 1, .pad_w = 1};
  Tensor<double> bw(big.weight_shape());
  CHECK_THROWS_AS(conv_as_matrix(big, bw, 64, 64), UsageError);
}

TEST_CASE("conv2d is linear in its input") {
  Rng rng(5);
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 3, .out_ch = 4, .pad_h = 1, .pad_w = 1};
  auto w = random_tensor<double>(g.weight_shape(), rng);
  auto x = random_tensor<double>({1, 6, 6, 3}, rng);
  auto y = random_tensor<double>({1, 6, 6, 3}, rng);
  const double a = 0.37, b = -1.91;
  Tensor<double> mix({1, 6, 6, 3});
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];

  Tape<double> t;
  auto wn = t.node(w);
  auto rx = ops::conv2d(t, t.node(x), wn, g);
  auto ry = ops::conv2d(t, t.node(y), wn, g);
  auto rm = ops::conv2d(t, t.node(mix), wn, g);
  for (std::size_t i = 0; i < rm->value.data.size(); ++i)
    CHECK(std::abs(rm->value.data[i] - (a * rx->value.data[i] + b * ry->value.data[i])) < 1e-12);
}

TEST_CASE("grouped conv: zeroing one input group only affects that output group") {
  Rng rng(6);
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 8, .out_ch = 8, .groups = 4, .pad_h = 1, .pad_w = 1};
  auto w = random_tensor<double>(g.weight_shape(), rng);
  auto x = random_tensor<double>({1, 4, 4, 8}, rng);
  Tensor<double> xz = x;
  for (std::int64_t p = 0; p < 16; ++p)
    for (int c = 2; c < 4; ++c) xz.data[static_cast<std::size_t>(p * 8 + c)] = 0.0;  // zero group 1

  Tape<double> t;
  auto y0 = ops::conv2d(t, t.node(x), t.node(w), g);
  auto y1 = ops::conv2d(t, t.node(xz), t.node(w), g);
  for (std::int64_t p = 0; p < 16; ++p)
    for (int c = 0; c < 8; ++c) {
      const bool same_group = c >= 2 && c < 4;
      const auto i = static_cast<std::size_t>(p * 8 + c);
      if (!same_group) CHECK(y0->value.data[i] == y1->value.data[i]);
    }
}

TEST_CASE("conv2d error messages name the offending extents") {
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 4, .out_ch = 4};
  Tape<double> t;
  Rng rng(7);
  auto x = t.node(random_tensor<double>({1, 4, 4, 3}, rng));
  auto w = t.node(random_tensor<double>(g.weight_shape(), rng));
  CHECK_THROWS_WITH_AS(ops::conv2d(t, x, w, g),
                       doctest::Contains("input has 3 channels"), ConfigError);
  ConvGeom bad{.kh = 1, .kw = 1, .in_ch = 4, .out_ch = 4, .groups = 3};
  CHECK_THROWS_AS(ops::conv2d(t, x, w, bad), ConfigError);
}

TEST_CASE("batch_norm: identity on normalized input, beta on constant input") {
  Rng rng(8);
  Tape<double> tape;
  const std::int64_t c = 2;

  // already zero-mean unit-variance input passes through (gamma=1, beta=0)
  Tensor<double> x({4, 3, 3, c});
  for (auto& v : x.data) v = rng.normal();
  for (std::int64_t ch = 0; ch < c; ++ch) {  // exactly normalize per channel
    double m = 0, s2 = 0;
    const std::int64_t rows = 36;
    for (std::int64_t r = 0; r < rows; ++r) m += x.data[static_cast<std::size_t>(r * c + ch)];
    m /= rows;
    for (std::int64_t r = 0; r < rows; ++r) {
      double d = x.data[static_cast<std::size_t>(r * c + ch)] - m;
      s2 += d * d;
    }
    s2 /= rows;
    for (std::int64_t r = 0; r < rows; ++r)
      x.data[static_cast<std::size_t>(r * c + ch)] =
          (x.data[static_cast<std::size_t>(r * c + ch)] - m) / std::sqrt(s2);
  }
  auto gamma = tape.node(Tensor<double>::full({c}, 1.0));
  auto beta = tape.node(Tensor<double>::zeros({c}));
  ops::BatchNormState<double> st(c);
  auto y = ops::batch_norm(tape, tape.node(x), gamma, beta, st, true);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    CHECK(y->value.data[i] == doctest::Approx(x.data[i]).epsilon(1e-4));

  // constant channel: output collapses to beta via the epsilon guard
  auto beta2 = tape.node(Tensor<double>::full({c}, 0.25));
  ops::BatchNormState<double> st2(c);
  auto yc = ops::batch_norm(tape, tape.node(Tensor<double>::full({2, 2, 2, c}, 5.0)), gamma, beta2,
                            st2, true);
  for (double v : yc->value.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("batch_norm: train-mode output statistics") {
  Rng rng(9);
  Tape<double> tape;
  const std::int64_t c = 2, rows = 8 * 8 * 8;
  Tensor<double> x({8, 8, 8, c});
  for (auto& v : x.data) v = rng.normal(3.0, 2.5);
  auto gamma = tape.node(Tensor<double>::full({c}, 1.0));
  auto beta = tape.node(Tensor<double>::zeros({c}));
  ops::BatchNormState<double> st(c);
  auto y = ops::batch_norm(tape, tape.node(x), gamma, beta, st, true);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double m = 0, s2 = 0;
    for (std::int64_t r = 0; r < rows; ++r) m += y->value.data[static_cast<std::size_t>(r * c + ch)];
    m /= rows;
    for (std::int64_t r = 0; r < rows; ++r) {
      double d = y->value.data[static_cast<std::size_t>(r * c + ch)] - m;
      s2 += d * d;
    }
    s2 /= rows;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(s2 - 1.0) < 1e-4);
  }
}

TEST_CASE("relu / add / global_avg_pool basics") {
  Tape<double> t;
  Tensor<double> x({1, 1, 1, 2});
  x.data = {-1.0, 2.0};
  auto r = ops::relu(t, t.node(x));
  CHECK(r->value.data[0] == 0.0);
  CHECK(r->value.data[1] == 2.0);

  Rng rng(10);
  auto a = t.node(random_tensor<double>({2, 3, 3, 2}, rng));
  auto z = t.node(Tensor<double>::zeros({2, 3, 3, 2}));
  auto s = ops::add(t, a, z);
  CHECK(s->value.data == a->value.data);

  auto cst = t.node(Tensor<double>::full({2, 4, 4, 3}, 1.5));
  auto p = ops::global_avg_pool(t, cst);
  CHECK(p->value.shape == Shape{2, 3});
  for (double v : p->value.data) CHECK(v == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("backward: 1x1 conv weight gradient equals summed input channel") {
  Rng rng(11);
  ConvGeom g{.kh = 1, .kw = 1, .in_ch = 2, .out_ch = 2};
  Tape<double> t;
  auto x = t.node(random_tensor<double>({1, 3, 3, 2}, rng), false);
  auto w = t.node(random_tensor<double>(g.weight_shape(), rng));
  auto y = ops::conv2d(t, x, w, g);
  auto loss = ops::sum_all(t, y);
  t.backward(loss);
  // d loss / d w[oc][ic] = sum over pixels of x[..., ic]
  for (int oc = 0; oc < 2; ++oc)
    for (int ic = 0; ic < 2; ++ic) {
      double expect = 0;
      for (std::int64_t p = 0; p < 9; ++p) expect += x->value.data[static_cast<std::size_t>(p * 2 + ic)];
      CHECK(w->grad.data[static_cast<std::size_t>(oc * 2 + ic)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("backward: unused parameter keeps zero gradient") {
  Rng rng(12);
  Tape<double> t;
  auto used = t.node(random_tensor<double>({1, 2, 2, 1}, rng));
  auto unused = t.node(random_tensor<double>({4}, rng));
  auto loss = ops::sum_all(t, used);
  t.backward(loss);
  for (double v : unused->grad.data) CHECK(v == 0.0);
}

TEST_CASE("backward: shared weight accumulates gradients from all sites") {
  Rng rng(13);
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 2, .out_ch = 2, .pad_h = 1, .pad_w = 1};
  auto wv = random_tensor<double>(g.weight_shape(), rng);
  auto xv = random_tensor<double>({1, 4, 4, 2}, rng);

  // shared: one node used twice
  Tape<double> t1;
  auto x1 = t1.node(xv, false);
  auto w1 = t1.node(wv);
  auto l1 = ops::sum_all(t1, ops::conv2d(t1, ops::conv2d(t1, x1, w1, g), w1, g));
  t1.backward(l1);

  // clone: two distinct nodes with identical values, grads summed by hand
  Tape<double> t2;
  auto x2 = t2.node(xv, false);
  auto wa = t2.node(wv);
  auto wb = t2.node(wv);
  auto l2 = ops::sum_all(t2, ops::conv2d(t2, ops::conv2d(t2, x2, wa, g), wb, g));
  t2.backward(l2);

  for (std::size_t i = 0; i < wv.data.size(); ++i)
    CHECK(w1->grad.data[i] ==
          doctest::Approx(wa->grad.data[i] + wb->grad.data[i]).epsilon(1e-11));
}

TEST_CASE("gradcheck: conv + bn + relu + pool + linear + cross-entropy") {
  Rng rng(14);
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 2, .out_ch = 4, .groups = 2, .pad_h = 1, .pad_w = 1};
  auto xv = random_tensor<double>({3, 5, 5, 2}, rng);
  auto wv = random_tensor<double>(g.weight_shape(), rng, 0.5);
  auto gv = random_tensor<double>({4}, rng, 0.2);
  for (auto& v : gv.data) v += 1.0;
  auto bv = random_tensor<double>({4}, rng, 0.2);
  auto hw = random_tensor<double>({3, 4}, rng, 0.5);
  auto hb = random_tensor<double>({3}, rng, 0.1);
  std::vector<int> labels = {0, 2, 1};

  auto run = [&](Tensor<double>* grads[5]) {
    Tape<double> t;
    auto x = t.node(xv, false);
    auto w = t.node(wv);
    auto ga = t.node(gv);
    auto be = t.node(bv);
    auto hwn = t.node(hw);
    auto hbn = t.node(hb);
    ops::BatchNormState<double> st(4);
    auto y = ops::conv2d(t, x, w, g);
    y = ops::batch_norm(t, y, ga, be, st, true);
    y = ops::relu(t, y);
    auto pooled = ops::global_avg_pool(t, y);
    auto logits = ops::linear(t, pooled, hwn, hbn);
    auto loss = ops::softmax_cross_entropy(t, logits, labels);
    if (grads) {
      t.backward(loss);
      *grads[0] = w->grad;
      *grads[1] = ga->grad;
      *grads[2] = be->grad;
      *grads[3] = hwn->grad;
      *grads[4] = hbn->grad;
    }
    return loss->value.data[0];
  };

  Tensor<double> gw, gg, gb, ghw, ghb;
  Tensor<double>* gptrs[5] = {&gw, &gg, &gb, &ghw, &ghb};
  run(gptrs);

  const double h = 1e-5;
  Tensor<double>* params[5] = {&wv, &gv, &bv, &hw, &hb};
  Tensor<double>* grads[5] = {&gw, &gg, &gb, &ghw, &ghb};
  for (int p = 0; p < 5; ++p) {
    for (std::size_t i = 0; i < params[p]->data.size(); ++i) {
      const double orig = params[p]->data[i];
      params[p]->data[i] = orig + h;
      const double lp = run(nullptr);
      params[p]->data[i] = orig - h;
      const double lm = run(nullptr);
      params[p]->data[i] = orig;
      const double fd = (lp - lm) / (2 * h);
      const double ad = grads[p]->data[i];
      const double err = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-3});
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("backward without forward is a usage error") {
  Tape<double> t;
  auto loss = t.node(Tensor<double>::zeros({1}));
  CHECK_THROWS_AS(t.backward(loss), UsageError);
}
