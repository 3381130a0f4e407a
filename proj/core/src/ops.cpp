// SPDX-License-Identifier: Apache-2.0
#include "octoconv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace octoconv {

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  require_same_shape(dst, src, "add");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor scale(const Tensor& a, float factor) {
  Tensor out = a;
  for (float& v : out.data()) v *= factor;
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  require_same_shape(grad_out, input, "relu_backward");
  Tensor out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(input[i] > 0.0f)) out[i] = 0.0f;
  return out;
}

MaxPoolResult max_pool3d(const Tensor& input, const Pool3dSpec& spec) {
  require_rank(input, 5, "max_pool3d input");
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
  std::array<AxisGeometry, 3> g;
  for (int a = 0; a < 3; ++a) {
    if (spec.stride[a] == 0) throw ShapeError("max_pool3d: stride must be >= 1");
    g[a] = window_geometry(input.dim(2 + a), spec.window[a], spec.stride[a], spec.padding);
  }
  const std::size_t od = g[0].out, oh = g[1].out, ow = g[2].out;

  MaxPoolResult res{Tensor({n, c, od, oh, ow}), {}};
  res.argmax.resize(res.output.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const std::size_t base = nc * D * H * W;
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::size_t best_idx = std::numeric_limits<std::size_t>::max();
          for (std::size_t wz = 0; wz < spec.window[0]; ++wz) {
            const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z * spec.stride[0] + wz) -
                                      static_cast<std::ptrdiff_t>(g[0].pad_front);
            if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(D)) continue;
            for (std::size_t wy = 0; wy < spec.window[1]; ++wy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * spec.stride[1] + wy) -
                                        static_cast<std::ptrdiff_t>(g[1].pad_front);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t wx = 0; wx < spec.window[2]; ++wx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * spec.stride[2] + wx) -
                                          static_cast<std::ptrdiff_t>(g[2].pad_front);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                const std::size_t idx = base + (iz * H + iy) * W + ix;
                if (best_idx == std::numeric_limits<std::size_t>::max() || input[idx] > best) {
                  best = input[idx];
                  best_idx = idx;
                }
              }
            }
          }
          res.output[o] = best;
          res.argmax[o] = static_cast<std::uint32_t>(best_idx);
        }
  }
  return res;
}

Tensor max_pool3d_backward(const Tensor& grad_out, const MaxPoolResult& forward, const Shape& input_shape) {
  require_same_shape(grad_out, forward.output, "max_pool3d_backward");
  Tensor grad(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad[forward.argmax[o]] += grad_out[o];
  return grad;
}

float mean(const Tensor& x) {
  if (x.empty()) throw ShapeError("mean of an empty tensor");
  double s = 0.0;
  for (float v : x.data()) s += v;
  return static_cast<float>(s / static_cast<double>(x.size()));
}

std::vector<std::size_t> argmax_rows(const Tensor& x) {
  require_rank(x, 2, "argmax_rows");
  std::vector<std::size_t> out(x.dim(0));
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    const float* row = x.ptr() + r * x.dim(1);
    out[r] = static_cast<std::size_t>(std::max_element(row, row + x.dim(1)) - row);
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows");
  Tensor out(logits.shape());
  const std::size_t k = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    const float* row = logits.ptr() + r * k;
    const float peak = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - peak));
    for (std::size_t j = 0; j < k; ++j)
      out[r * k + j] = static_cast<float>(std::exp(static_cast<double>(row[j] - peak)) / z);
  }
  return out;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ShapeError("softmax_cross_entropy: label count mismatch");
  LossAndGrad res{0.0, Tensor(logits.shape())};
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k)
      throw ShapeError("softmax_cross_entropy: label out of range");
    const float* row = logits.ptr() + r * k;
    const double peak = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - peak);
    const double log_z = std::log(z) + peak;
    res.loss += log_z - row[labels[r]];
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - log_z);
      res.grad[r * k + j] =
          static_cast<float>((p - (static_cast<std::size_t>(labels[r]) == j ? 1.0 : 0.0)) / n);
    }
  }
  res.loss /= static_cast<double>(n);
  return res;
}

}  // namespace octoconv
