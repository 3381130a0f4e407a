// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace octoconv::testing {

// Each check builds a randomized small case from the seed, compares the
// analytic backward pass with central differences and returns the worst
// relative error. A double-precision oracle stands in for the forward pass
// where float rounding would swamp the step; if the library forward
// disagrees with that oracle the check returns infinity.
double conv3d_gradient_error(std::uint64_t seed);
double gconv_gradient_error(std::uint64_t seed);
double batchnorm_gradient_error(std::uint64_t seed);
double orientation_pool_gradient_error(std::uint64_t seed);
double max_pool_gradient_error(std::uint64_t seed);
double relu_gradient_error(std::uint64_t seed);
double dropout_gradient_error(std::uint64_t seed);
double dense_gradient_error(std::uint64_t seed);
double cross_entropy_gradient_error(std::uint64_t seed);

struct LayerGradientCheck {
  std::string name;
  double (*run)(std::uint64_t seed);
};

const std::vector<LayerGradientCheck>& layer_gradient_checks();

}  // namespace octoconv::testing
