// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>

#include "octoconv/tensor.hpp"

namespace octoconv {

enum class Padding { kValid, kSame };

/// Stride and padding of a 3D cross-correlation; the kernel extent comes
/// from the filter tensor. SAME pads with zeros, odd remainders go to the
/// trailing side.
struct Conv3dSpec {
  std::array<std::size_t, 3> stride{1, 1, 1};  // (z, y, x)
  Padding padding = Padding::kValid;
};

/// Per-axis output extent and leading pad for a sliding window.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_front = 0;
  std::size_t pad_total = 0;
};

AxisGeometry window_geometry(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

/// input [n, c_in, D, H, W], filters [c_out, c_in, kz, ky, kx] ->
/// [n, c_out, D', H', W']. No kernel flip.
Tensor conv3d_forward(const Tensor& input, const Tensor& filters, const Conv3dSpec& spec);

struct Conv3dGrads {
  Tensor input;
  Tensor filters;
};

/// Exact gradients of conv3d_forward; filter gradients are summed over the batch.
Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& filters,
                            const Conv3dSpec& spec);

/// Zero-pads the three spatial axes of a [n, c, D, H, W] tensor.
Tensor pad3d(const Tensor& input, std::array<std::size_t, 3> front, std::array<std::size_t, 3> back);

}  // namespace octoconv
