// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "octoconv/conv3d.hpp"
#include "octoconv/tensor.hpp"

namespace octoconv {

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
void add_inplace(Tensor& dst, const Tensor& src);

Tensor relu(const Tensor& x);
/// Passes grad where the forward input was strictly positive.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

struct Pool3dSpec {
  std::array<std::size_t, 3> window{2, 2, 2};
  std::array<std::size_t, 3> stride{2, 2, 2};
  Padding padding = Padding::kSame;
};

struct MaxPoolResult {
  Tensor output;
  /// Flat index into the input of the selected voxel, per output element.
  std::vector<std::uint32_t> argmax;
};

/// Max pooling on [n, c, D, H, W]. SAME padding behaves as a -inf border,
/// so padded taps are never selected.
MaxPoolResult max_pool3d(const Tensor& input, const Pool3dSpec& spec);
Tensor max_pool3d_backward(const Tensor& grad_out, const MaxPoolResult& forward, const Shape& input_shape);

float mean(const Tensor& x);
/// Index of the largest entry of each row of a [rows, cols] tensor.
std::vector<std::size_t> argmax_rows(const Tensor& x);
/// Row-wise softmax of [rows, cols] logits, max-subtracted.
Tensor softmax_rows(const Tensor& logits);

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean cross-entropy of [n, k] logits against integer labels, with the
/// gradient of the mean with respect to the logits.
LossAndGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace octoconv
