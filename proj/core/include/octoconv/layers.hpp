// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "octoconv/conv3d.hpp"
#include "octoconv/filter_transform.hpp"
#include "octoconv/group.hpp"
#include "octoconv/rng.hpp"
#include "octoconv/tensor.hpp"

namespace octoconv {

/// Group convolution: the canonical filter bank is expanded into |H|
/// transformed copies and convolved translationally with the input.
/// Channel layout of inputs and outputs is (feature, orientation) with
/// orientation fastest; bias is one value per feature.
class GConvLayer {
 public:
  GConvLayer(const SymmetryGroup& group, const PermutationRep& rho, std::size_t n_in,
             std::size_t n_out, GridShape kernel, bool first_layer, Conv3dSpec conv = {{1, 1, 1}, Padding::kSame});

  std::size_t n_in() const { return n_in_; }
  std::size_t n_out() const { return n_out_; }
  std::size_t group_order() const { return plan_.group_order; }
  bool first_layer() const { return plan_.first_layer; }
  std::size_t in_channels() const { return first_layer() ? n_in_ : n_in_ * group_order(); }
  std::size_t out_channels() const { return n_out_ * group_order(); }
  const FilterTransformPlan& plan() const { return plan_; }
  const Conv3dSpec& conv_spec() const { return conv_; }

  /// n_out * n_in * (|H| if higher) * kz*ky*kx + n_out.
  std::size_t parameter_count() const { return filters.size() + bias.size(); }

  /// Xavier fans: fan_in = in_channels * kvol, fan_out = out_channels * kvol.
  std::size_t fan_in() const;
  std::size_t fan_out() const;

  Tensor filters;  // canonical, shape plan().filter_shape(n_out, n_in)
  Tensor bias;     // [n_out]

 private:
  std::size_t n_in_, n_out_;
  FilterTransformPlan plan_;
  Conv3dSpec conv_;
};

Tensor gconv_forward(const GConvLayer& layer, const Tensor& input);

struct GConvGrads {
  Tensor input;
  Tensor filters;
  Tensor bias;
};

GConvGrads gconv_backward(const GConvLayer& layer, const Tensor& input, const Tensor& grad_out);

struct OrientationPoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;
};

/// Max over each feature's |H| orientation channels.
OrientationPoolResult orientation_pool(const Tensor& input, std::size_t group_order);
Tensor orientation_pool_backward(const Tensor& grad_out, const OrientationPoolResult& forward,
                                 const Shape& input_shape);

/// Batch norm with one (gamma, beta) pair and one running mean/variance per
/// feature, shared by its |H| orientation channels. Statistics are taken over
/// batch x orientation x space.
class EquivariantBatchNorm {
 public:
  EquivariantBatchNorm(std::size_t features, std::size_t group_order, float momentum = 0.1f,
                       float epsilon = 1e-5f);

  std::size_t features() const { return gamma.size(); }
  std::size_t group_order() const { return group_order_; }
  std::size_t parameter_count() const { return gamma.size() + beta.size(); }

  Tensor gamma, beta;
  Tensor running_mean, running_var;
  /// Training batches seen so far ([1]); until 1/momentum batches the
  /// running statistics are a plain cumulative average.
  Tensor batches_tracked;
  float momentum, epsilon;

 private:
  std::size_t group_order_;
};

struct BatchNormCache {
  Tensor x_hat;
  std::vector<float> inv_std;
};

/// Training mode normalizes with batch statistics, updates the running
/// statistics, and fills cache. Eval mode uses the running statistics.
Tensor batchnorm_forward(EquivariantBatchNorm& bn, const Tensor& x, bool training, BatchNormCache* cache);

struct BatchNormGrads {
  Tensor input, gamma, beta;
};

BatchNormGrads batchnorm_backward(const EquivariantBatchNorm& bn, const BatchNormCache& cache,
                                  const Tensor& grad_out);

struct DropoutCache {
  std::vector<float> mask;  // 0 or 1/(1-p)
};

/// Inverted dropout with an independent mask per element.
Tensor dropout_forward(const Tensor& x, float p, Rng& rng, DropoutCache* cache);
Tensor dropout_backward(const Tensor& grad_out, const DropoutCache& cache);

/// Affine map on flattened features: [n, in] -> [n, out].
struct Dense {
  Dense(std::size_t in, std::size_t out);
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
};

Tensor dense_forward(const Dense& layer, const Tensor& x);

struct DenseGrads {
  Tensor input, weight, bias;
};

DenseGrads dense_backward(const Dense& layer, const Tensor& x, const Tensor& grad_out);

}  // namespace octoconv
