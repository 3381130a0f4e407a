// SPDX-License-Identifier: Apache-2.0
#include "octoconv/equivariance.hpp"

#include <algorithm>

#include "octoconv/layers.hpp"
#include "octoconv/ops.hpp"

namespace octoconv {
namespace {

void fill_random(Tensor& t, Rng& rng, bool integer_valued, int lo, int hi, double sparsity = 0.0) {
  for (float& v : t.data()) {
    if (!integer_valued)
      v = static_cast<float>(rng.uniform(-1.0, 1.0));
    else
      v = rng.bernoulli(sparsity) ? 0.0f : static_cast<float>(rng.integer(lo, hi));
  }
}

struct Stack {
  std::vector<GConvLayer> layers;
  std::vector<EquivariantBatchNorm> norms;

  Tensor run(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      y = gconv_forward(layers[i], y);
      if (!norms.empty()) y = batchnorm_forward(norms[i], y, false, nullptr);
      if (i + 1 < layers.size()) y = relu(y);
    }
    return y;
  }
};

}  // namespace

EquivarianceReport check_gconv_equivariance(const SymmetryGroup& group, const PermutationRep& rho,
                                            const EquivarianceOptions& options) {
  if (options.depth < 1) throw std::invalid_argument("equivariance depth must be >= 1");
  EquivarianceReport report;
  report.group_name = group.name();
  report.depth = options.depth;
  report.worst_per_element.assign(group.order(), 0.0);
  const std::size_t G = group.order();

  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    Rng rng(derive_seed(options.seed, 0xe9, trial));
    Stack stack;
    for (std::size_t l = 0; l < options.depth; ++l) {
      const bool first = l == 0;
      GConvLayer layer(group, rho, first ? options.in_channels : options.features, options.features, {3, 3, 3}, first);
      if (options.integer_valued) {
        // Sparse integer filters keep deep partial sums far below 2^24.
        fill_random(layer.filters, rng, true, -1, 1, first ? 0.0 : 0.9);
        fill_random(layer.bias, rng, true, -1, 1);
      } else {
        layer.filters = xavier_uniform(layer.filters.shape(), layer.fan_in(), layer.fan_out(), rng);
        fill_random(layer.bias, rng, false, 0, 0);
      }
      stack.layers.push_back(std::move(layer));
      if (options.with_batchnorm) {
        EquivariantBatchNorm bn(options.features, G);
        for (std::size_t f = 0; f < options.features; ++f) {
          bn.gamma[f] = static_cast<float>(rng.uniform(0.5, 1.5));
          bn.beta[f] = static_cast<float>(rng.uniform(-0.5, 0.5));
          bn.running_mean[f] = static_cast<float>(rng.uniform(-0.5, 0.5));
          bn.running_var[f] = static_cast<float>(rng.uniform(0.5, 2.0));
        }
        stack.norms.push_back(std::move(bn));
      }
    }

    Tensor x({1, options.in_channels, options.spatial[0], options.spatial[1], options.spatial[2]});
    fill_random(x, rng, options.integer_valued, -3, 3);
    const Tensor fx = stack.run(x);
    for (std::size_t h = 0; h < G; ++h) {
      const GroupElement& g = group.element(h);
      const Tensor lhs = stack.run(transform_volume(g, x));
      const Tensor rhs = permute_orientation_channels(transform_volume(g, fx), rho.perms[h]);
      const double err = max_abs_diff(lhs, rhs);
      report.worst_per_element[h] = std::max(report.worst_per_element[h], err);
      report.worst = std::max(report.worst, err);
    }
  }
  return report;
}

PermutationRep corrupt_rho(const PermutationRep& rho) {
  PermutationRep bad = rho;
  for (auto& p : bad.perms) {
    if (p.size() < 2 || p == identity_permutation(p.size())) continue;
    std::swap(p[0], p[1]);
    break;
  }
  return bad;
}

EquivarianceReport check_model_invariance(Model& model, std::size_t trials, std::uint64_t seed) {
  const auto& group = model.group();
  const auto& in = model.config().input_shape;
  EquivarianceReport report;
  report.group_name = group.name();
  report.depth = model.convs.size();
  report.worst_per_element.assign(group.order(), 0.0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(seed, 0x1a7, trial));
    Tensor x({2, in[0], in[1], in[2], in[3]});
    fill_random(x, rng, false, 0, 0);
    const Tensor base = model.forward(x, Mode::kEval);
    for (std::size_t h = 0; h < group.order(); ++h) {
      const double err = max_abs_diff(model.forward(transform_volume(group.element(h), x), Mode::kEval), base);
      report.worst_per_element[h] = std::max(report.worst_per_element[h], err);
      report.worst = std::max(report.worst, err);
    }
  }
  return report;
}

}  // namespace octoconv
