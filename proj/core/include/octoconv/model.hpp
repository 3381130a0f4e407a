// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "octoconv/layers.hpp"
#include "octoconv/ops.hpp"

namespace octoconv {

/// Architecture of the six-layer 3D classifier and its group variants.
struct ModelConfig {
  GroupName group_name = GroupName::kTrivial;
  /// Baseline (trivial group) channel counts of the six conv layers.
  std::vector<std::size_t> base_widths{8, 8, 16, 16, 32, 32};
  GridShape kernel{3, 3, 3};
  /// 1-based conv layer numbers followed by 2x2x2/stride-2 SAME max pooling.
  std::vector<std::size_t> pool_after{1, 3, 5};
  /// 1-based conv layer numbers followed by dropout.
  std::vector<std::size_t> dropout_after{2, 4};
  float dropout_p = 0.3f;
  /// (c, D, H, W) of one sample.
  std::array<std::size_t, 4> input_shape{1, 6, 24, 24};
  std::size_t n_classes = 2;
  /// Divide widths by sqrt(|H|) (rounded, floor 1) to keep parameters level.
  bool scale_widths = true;

  /// Per-layer feature counts after the width rule.
  std::vector<std::size_t> widths() const;
  void validate() const;

  /// 6x24x24 patches, widths 8..32.
  static ModelConfig desk(GroupName group);
  /// 12x72x72 patches, widths 16..64.
  static ModelConfig paper_shape(GroupName group);
};

/// round(base / sqrt(order)), at least 1.
std::size_t scaled_width(std::size_t base, std::size_t group_order);

/// Parameter count from the counting formula alone (no allocation).
std::size_t count_parameters(const ModelConfig& config);

enum class Mode { kTrain, kEval };

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// gconv -> BN -> ReLU, six times, with pooling and dropout placed per
/// config, then orientation max-pool, flatten and a dense layer.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const SymmetryGroup& group() const { return group_; }
  const PermutationRep& rho() const { return rho_; }

  /// x: [n, c, D, H, W] -> logits [n, n_classes]. Training mode caches
  /// activations for backward() and needs an rng for dropout.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr);
  /// Accumulates parameter gradients for the last training forward().
  void backward(const Tensor& grad_logits);
  void zero_grad();

  std::vector<ParamRef> parameters();
  /// Non-trainable state saved in checkpoints (BN running statistics).
  std::vector<std::pair<std::string, Tensor*>> buffers();
  std::size_t parameter_count() const;

  std::vector<GConvLayer> convs;
  std::vector<EquivariantBatchNorm> norms;
  Dense head;

 private:
  struct StageCache {
    Tensor conv_in;
    BatchNormCache bn;
    Tensor bn_out;
    bool pooled = false;
    MaxPoolResult pool;
    Shape pool_in_shape;
    bool dropped = false;
    DropoutCache dropout;
  };

  ModelConfig config_;
  SymmetryGroup group_;
  PermutationRep rho_;
  std::vector<std::size_t> widths_;

  std::vector<StageCache> cache_;
  OrientationPoolResult head_pool_;
  Shape head_pool_in_shape_;
  Tensor head_in_;
  bool has_cache_ = false;

  std::vector<GConvGrads> conv_grads_;
  std::vector<BatchNormGrads> bn_grads_;
  DenseGrads head_grads_;
};

/// Builds the model and draws uniform Xavier weights from seed.
Model build_model(const ModelConfig& config, std::uint64_t seed);

/// Uniform on +-sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// Fans inferred as fan_in = shape[1]*receptive, fan_out = shape[0]*receptive.
Tensor xavier_uniform(const Shape& shape, Rng& rng);

struct AdamHyper {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its grad.
void adam_step(const std::vector<ParamRef>& params, AdamState& state, const AdamHyper& hyper);

}  // namespace octoconv
