// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "octoconv/group.hpp"
#include "octoconv/tensor.hpp"

namespace octoconv {

/// Extent of a 3D grid in array order (z, y, x).
using GridShape = std::array<std::size_t, 3>;

/// Gather map that rotates a (z, y, x) grid about its center by h:
/// out[p] = in[R^-1 (p - c) + c], with R acting on (x, y, z) offsets.
/// Throws ShapeError when h does not map the grid onto itself (for example
/// a 90 degree turn about z on a grid with H != W).
Permutation grid_permutation(const GroupElement& h, const GridShape& dims);

struct SpatialPermutation {
  GridShape kernel{};
  Permutation source;  // destination voxel -> source voxel
};

/// Kernel dims must be odd; see grid_permutation for the action.
SpatialPermutation spatial_permutation(const GroupElement& h, const GridShape& kernel);

/// Precomputed filter-bank indices for one group and kernel shape.
///
/// First layer: maps[j] permutes the kz*ky*kx voxels of each input channel.
/// Higher layers: maps[j] permutes the |H|*kz*ky*kx (orientation, voxel)
/// slots of each input feature; slot (o, p) reads source slot
/// (rho[j][o], spatial_j[p]).
struct FilterTransformPlan {
  GroupName group_name = GroupName::kTrivial;
  GridShape kernel{};
  bool first_layer = true;
  std::size_t group_order = 1;
  std::vector<Permutation> maps;

  std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
  /// Number of slots each map permutes.
  std::size_t slots() const { return first_layer ? kernel_volume() : group_order * kernel_volume(); }
  /// Expected canonical filter shape for the given feature counts.
  Shape filter_shape(std::size_t n_out, std::size_t n_in) const;
};

FilterTransformPlan build_plan(const SymmetryGroup& group, const PermutationRep& rho,
                               const GridShape& kernel, bool first_layer);

/// First layer: [n_out, n_in, kz, ky, kx] -> [n_out*|H|, n_in, kz, ky, kx].
/// Higher:      [n_out, n_in, |H|, kz, ky, kx] -> [n_out*|H|, n_in*|H|, kz, ky, kx].
/// Copy j of filter i lands at output filter i*|H| + j.
Tensor expand_filters(const FilterTransformPlan& plan, const Tensor& filters);

/// Transpose of expand_filters: accumulates the gradients of all |H|
/// transformed copies back into the canonical filter layout.
Tensor reduce_expanded_grad(const FilterTransformPlan& plan, const Tensor& grad_expanded,
                            const Shape& filter_shape);

/// Applies h spatially to every channel of a [n, c, D, H, W] tensor.
Tensor transform_volume(const GroupElement& h, const Tensor& x);

/// Channels are laid out (feature, orientation) with orientation fastest:
/// out[f*|H| + o] = in[f*|H| + perm[o]].
Tensor permute_orientation_channels(const Tensor& x, const Permutation& perm);

}  // namespace octoconv
