// SPDX-License-Identifier: Apache-2.0
#include "octoconv/filter_transform.hpp"

#include <algorithm>

namespace octoconv {

Permutation grid_permutation(const GroupElement& h, const GridShape& dims) {
  // Doubled, centered coordinates keep even extents on the integer lattice.
  const long D = static_cast<long>(dims[0]), H = static_cast<long>(dims[1]),
             W = static_cast<long>(dims[2]);
  const GroupElement inv = h.inverse();
  Permutation map(dims[0] * dims[1] * dims[2]);
  std::size_t dst = 0;
  for (long z = 0; z < D; ++z)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x, ++dst) {
        const GroupElement::Vec3 v{static_cast<int>(2 * x - (W - 1)), static_cast<int>(2 * y - (H - 1)),
                                   static_cast<int>(2 * z - (D - 1))};
        const auto u = inv.apply(v);
        const long tx = u[0] + (W - 1), ty = u[1] + (H - 1), tz = u[2] + (D - 1);
        const long sx = tx / 2, sy = ty / 2, sz = tz / 2;
        const bool on_grid = tx % 2 == 0 && ty % 2 == 0 && tz % 2 == 0;
        if (!on_grid || tx < 0 || sx >= W || ty < 0 || sy >= H || tz < 0 || sz >= D)
          throw ShapeError("anisotropy violation: element " + format_matrix(h) +
                           " does not map a " + shape_string({dims[0], dims[1], dims[2]}) +
                           " grid onto itself");
        map[dst] = static_cast<std::size_t>((sz * H + sy) * W + sx);
      }
  return map;
}

SpatialPermutation spatial_permutation(const GroupElement& h, const GridShape& kernel) {
  for (std::size_t k : kernel)
    if (k == 0 || k % 2 == 0)
      throw ShapeError("filter transform requires odd kernel dims, got " +
                       shape_string({kernel[0], kernel[1], kernel[2]}));
  return {kernel, grid_permutation(h, kernel)};
}

Shape FilterTransformPlan::filter_shape(std::size_t n_out, std::size_t n_in) const {
  if (first_layer) return {n_out, n_in, kernel[0], kernel[1], kernel[2]};
  return {n_out, n_in, group_order, kernel[0], kernel[1], kernel[2]};
}

FilterTransformPlan build_plan(const SymmetryGroup& group, const PermutationRep& rho,
                               const GridShape& kernel, bool first_layer) {
  const std::size_t order = group.order();
  if (rho.perms.size() != order) throw ShapeError("build_plan: rho does not match group order");

  FilterTransformPlan plan;
  plan.group_name = group.name();
  plan.kernel = kernel;
  plan.first_layer = first_layer;
  plan.group_order = order;
  plan.maps.reserve(order);

  const std::size_t kvol = plan.kernel_volume();
  for (std::size_t j = 0; j < order; ++j) {
    const SpatialPermutation spatial = spatial_permutation(group.element(j), kernel);
    if (first_layer) {
      plan.maps.push_back(spatial.source);
      continue;
    }
    Permutation map(order * kvol);
    for (std::size_t o = 0; o < order; ++o)
      for (std::size_t p = 0; p < kvol; ++p) map[o * kvol + p] = rho.perms[j][o] * kvol + spatial.source[p];
    plan.maps.push_back(std::move(map));
  }
  return plan;
}

namespace {

struct BankLayout {
  std::size_t n_out, n_in, slots;
};

BankLayout check_canonical(const FilterTransformPlan& plan, const Shape& shape) {
  const std::size_t rank = plan.first_layer ? 5 : 6;
  if (shape.size() != rank)
    throw ShapeError("filter bank " + shape_string(shape) + " does not match a " +
                     (plan.first_layer ? "first" : "higher") + "-layer plan");
  const Shape expected = plan.filter_shape(shape[0], shape[1]);
  if (shape != expected)
    throw ShapeError("filter bank " + shape_string(shape) + " does not match plan shape " +
                     shape_string(expected));
  return {shape[0], shape[1], plan.slots()};
}

}  // namespace

Tensor expand_filters(const FilterTransformPlan& plan, const Tensor& filters) {
  const BankLayout b = check_canonical(plan, filters.shape());
  const std::size_t G = plan.group_order;
  const std::size_t in_channels = plan.first_layer ? b.n_in : b.n_in * G;
  Tensor out({b.n_out * G, in_channels, plan.kernel[0], plan.kernel[1], plan.kernel[2]});

  const std::size_t filter_len = b.n_in * b.slots;
  const float* src = filters.ptr();
  float* dst = out.ptr();
  for (std::size_t i = 0; i < b.n_out; ++i)
    for (std::size_t j = 0; j < G; ++j) {
      const std::size_t* map = plan.maps[j].data();
      const float* f = src + i * filter_len;
      float* e = dst + (i * G + j) * filter_len;
      for (std::size_t c = 0; c < b.n_in; ++c) {
        const float* fc = f + c * b.slots;
        float* ec = e + c * b.slots;
        for (std::size_t s = 0; s < b.slots; ++s) ec[s] = fc[map[s]];
      }
    }
  return out;
}

Tensor reduce_expanded_grad(const FilterTransformPlan& plan, const Tensor& grad_expanded,
                            const Shape& filter_shape) {
  const BankLayout b = check_canonical(plan, filter_shape);
  const std::size_t G = plan.group_order;
  const std::size_t filter_len = b.n_in * b.slots;
  if (grad_expanded.size() != b.n_out * G * filter_len || grad_expanded.dim(0) != b.n_out * G)
    throw ShapeError("reduce_expanded_grad: expanded gradient " + shape_string(grad_expanded.shape()) +
                     " does not match filter bank " + shape_string(filter_shape));

  Tensor grad(filter_shape);
  for (std::size_t i = 0; i < b.n_out; ++i)
    for (std::size_t j = 0; j < G; ++j) {
      const std::size_t* map = plan.maps[j].data();
      float* g = grad.ptr() + i * filter_len;
      const float* e = grad_expanded.ptr() + (i * G + j) * filter_len;
      for (std::size_t c = 0; c < b.n_in; ++c) {
        float* gc = g + c * b.slots;
        const float* ec = e + c * b.slots;
        for (std::size_t s = 0; s < b.slots; ++s) gc[map[s]] += ec[s];
      }
    }
  return grad;
}

Tensor transform_volume(const GroupElement& h, const Tensor& x) {
  require_rank(x, 5, "transform_volume");
  const GridShape dims{x.dim(2), x.dim(3), x.dim(4)};
  const Permutation map = grid_permutation(h, dims);
  const std::size_t vol = map.size();
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < x.dim(0) * x.dim(1); ++ch) {
    const float* src = x.ptr() + ch * vol;
    float* dst = out.ptr() + ch * vol;
    for (std::size_t p = 0; p < vol; ++p) dst[p] = src[map[p]];
  }
  return out;
}

Tensor permute_orientation_channels(const Tensor& x, const Permutation& perm) {
  require_rank(x, 5, "permute_orientation_channels");
  const std::size_t G = perm.size();
  if (G == 0 || x.dim(1) % G != 0)
    throw ShapeError("permute_orientation_channels: " + std::to_string(x.dim(1)) +
                     " channels not divisible by group order " + std::to_string(G));
  const std::size_t vol = x.dim(2) * x.dim(3) * x.dim(4);
  const std::size_t features = x.dim(1) / G;
  Tensor out(x.shape());
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t f = 0; f < features; ++f)
      for (std::size_t o = 0; o < G; ++o) {
        const float* src = x.ptr() + ((n * features + f) * G + perm[o]) * vol;
        std::copy(src, src + vol, out.ptr() + ((n * features + f) * G + o) * vol);
      }
  return out;
}

}  // namespace octoconv
