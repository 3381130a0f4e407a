// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "octoconv/filter_transform.hpp"
#include "octoconv/model.hpp"

namespace octoconv {

struct EquivarianceOptions {
  /// Number of stacked gconv layers (first layer plus depth-1 higher ones),
  /// with ReLU in between.
  std::size_t depth = 1;
  std::size_t trials = 2;
  std::size_t in_channels = 1;
  std::size_t features = 2;
  GridShape spatial{7, 7, 7};
  /// Small integers for inputs, filters and biases so every sum is exact.
  bool integer_valued = false;
  /// Put eval-mode batch norm (random statistics) after each gconv.
  bool with_batchnorm = false;
  std::uint64_t seed = 0;
};

struct EquivarianceReport {
  GroupName group_name = GroupName::kTrivial;
  std::size_t depth = 0;
  /// Worst max-abs deviation per group element, over all trials.
  std::vector<double> worst_per_element;
  double worst = 0.0;
};

/// For every h, compares f(h x) with rho(h) h f(x) on random stacks.
EquivarianceReport check_gconv_equivariance(const SymmetryGroup& group, const PermutationRep& rho,
                                            const EquivarianceOptions& options);

/// Returns rho with two entries of the first non-identity permutation
/// swapped; a negative control for the checker.
PermutationRep corrupt_rho(const PermutationRep& rho);

/// Worst max-abs |logits(h x) - logits(x)| over h and trials, eval mode.
/// The model input must be mapped onto itself by every h.
EquivarianceReport check_model_invariance(Model& model, std::size_t trials, std::uint64_t seed);

}  // namespace octoconv
