#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mgiad/dense.hpp"
#include "mgiad/errors.hpp"
#include "mgiad/tensor.hpp"

namespace mgiad {

// Geometry of a (possibly grouped, possibly strided) 2-D convolution.
// Weights are (out_ch, in_ch/groups, kh, kw); no bias terms anywhere, every
// convolution in a network is followed by its own normalization if needed.
struct ConvGeom {
  int kh = 3, kw = 3;
  int in_ch = 1, out_ch = 1;
  int groups = 1;
  int stride = 1;
  int pad_h = 0, pad_w = 0;

  int in_per_group() const { return in_ch / groups; }
  int out_per_group() const { return out_ch / groups; }
  std::int64_t weight_count() const {
    return static_cast<std::int64_t>(kh) * kw * in_per_group() * out_ch;
  }
  Shape weight_shape() const { return {out_ch, in_per_group(), kh, kw}; }

  std::array<std::int64_t, 2> out_hw(std::int64_t h, std::int64_t w) const {
    return {(h + 2 * pad_h - kh) / stride + 1, (w + 2 * pad_w - kw) / stride + 1};
  }

  void validate() const {
    if (kh < 1 || kw < 1 || in_ch < 1 || out_ch < 1 || groups < 1 || stride < 1 || pad_h < 0 ||
        pad_w < 0)
      throw ConfigError("conv: all extents must be positive (kh=" + std::to_string(kh) +
                        " kw=" + std::to_string(kw) + " in=" + std::to_string(in_ch) +
                        " out=" + std::to_string(out_ch) + " groups=" + std::to_string(groups) +
                        " stride=" + std::to_string(stride) + ")");
    if (in_ch % groups != 0 || out_ch % groups != 0)
      throw ConfigError("conv: groups=" + std::to_string(groups) +
                        " must divide in_ch=" + std::to_string(in_ch) +
                        " and out_ch=" + std::to_string(out_ch));
  }

  void validate_input(const Shape& s) const {
    validate();
    if (s.size() != 4)
      throw ConfigError("conv: expected rank-4 NHWC input, got " + shape_str(s));
    if (s[3] != in_ch)
      throw ConfigError("conv: input has " + std::to_string(s[3]) + " channels, operator expects " +
                        std::to_string(in_ch));
    if (s[1] + 2 * pad_h < kh || s[2] + 2 * pad_w < kw)
      throw ConfigError("conv: spatial extents " + shape_str(s) + " smaller than stencil " +
                        std::to_string(kh) + "x" + std::to_string(kw) + " after padding");
  }
};

// Explicit matrix of the convolution acting on one flattened sample.
// Flattening order: pixels row-major, channels fastest, i.e.
// index(i,j,k) = (i*width + j)*channels + k. With grouped operators the
// entry (out,in) is zero whenever the two channels belong to different
// groups. Intended for small oracle instances only; refuses to build
// matrices with more than max_rows rows.
template <typename T>
dense::Matrix conv_as_matrix(const ConvGeom& g, const Tensor<T>& weight, std::int64_t in_h,
                             std::int64_t in_w, std::int64_t max_rows = 10000) {
  g.validate();
  if (weight.shape != g.weight_shape())
    throw ConfigError("conv_as_matrix: weight shape " + shape_str(weight.shape) +
                      " does not match operator " + shape_str(g.weight_shape()));
  auto [oh, ow] = g.out_hw(in_h, in_w);
  if (oh < 1 || ow < 1)
    throw ConfigError("conv_as_matrix: output would be empty for input " + std::to_string(in_h) +
                      "x" + std::to_string(in_w));
  const std::int64_t rows = oh * ow * g.out_ch;
  const std::int64_t cols = in_h * in_w * g.in_ch;
  if (rows > max_rows)
    throw UsageError("conv_as_matrix: " + std::to_string(rows) + " rows exceeds safety bound " +
                     std::to_string(max_rows) + "; the matrix oracle is for small instances");

  dense::Matrix m(rows, cols);
  const int icg = g.in_per_group();
  const int ocg = g.out_per_group();
  for (std::int64_t oi = 0; oi < oh; ++oi)
    for (std::int64_t oj = 0; oj < ow; ++oj)
      for (int oc = 0; oc < g.out_ch; ++oc) {
        const std::int64_t row = (oi * ow + oj) * g.out_ch + oc;
        const int grp = oc / ocg;
        for (int ki = 0; ki < g.kh; ++ki) {
          const std::int64_t ii = oi * g.stride - g.pad_h + ki;
          if (ii < 0 || ii >= in_h) continue;
          for (int kj = 0; kj < g.kw; ++kj) {
            const std::int64_t jj = oj * g.stride - g.pad_w + kj;
            if (jj < 0 || jj >= in_w) continue;
            for (int ic = 0; ic < icg; ++ic) {
              const std::int64_t col = (ii * in_w + jj) * g.in_ch + grp * icg + ic;
              const std::int64_t widx = ((static_cast<std::int64_t>(oc) * icg + ic) * g.kh + ki) * g.kw + kj;
              m(row, col) += static_cast<double>(weight.data[static_cast<std::size_t>(widx)]);
            }
          }
        }
      }
  return m;
}

}  // namespace mgiad
