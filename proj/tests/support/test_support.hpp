// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "octoconv/conv3d.hpp"
#include "octoconv/froc.hpp"
#include "octoconv/group.hpp"
#include "octoconv/rng.hpp"
#include "octoconv/tensor.hpp"

namespace octoconv::testing {

Tensor random_tensor(const Shape& shape, Rng& rng, float lo = -1.0f, float hi = 1.0f);
Tensor random_int_tensor(const Shape& shape, Rng& rng, int lo, int hi);

/// Six nested loops over output and kernel positions, zero padding read
/// through explicit bounds checks.
Tensor naive_conv3d(const Tensor& input, const Tensor& filters, const Conv3dSpec& spec);

/// <probe, conv(input, filters) + bias> in double. Output channel o uses
/// bias[o / bias_group]; an empty bias means none.
double conv3d_probe_loss(const Tensor& probe, const Tensor& input, const Tensor& filters, const Tensor& bias,
                         std::size_t bias_group, const Conv3dSpec& spec);

/// Rotates a (z, y, x) volume by a signed permutation matrix by mapping
/// every voxel's centered coordinate directly (no precomputed gather).
Tensor naive_rotate_volume(const GroupElement& h, const Tensor& x);

/// All 48 signed 3x3 permutation matrices.
std::vector<GroupElement> all_signed_permutations();

/// Central-difference derivative of scalar f along every entry of x,
/// evaluated in double around the float values. With max_entries > 0 only
/// an evenly strided subset is probed; the rest stay NaN and are skipped by
/// compare_gradients.
std::vector<double> numeric_gradient(Tensor& x, const std::function<double()>& f, double eps,
                                     std::size_t max_entries = 0);

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a| + |n|, floor) over the entries.
GradCheck compare_gradients(const Tensor& analytic, const std::vector<double>& numeric, double floor = 1e-2);

/// Weighted sum <w, y> in double, used as a scalar probe loss.
double dot(const Tensor& w, const Tensor& y);

/// Independent FROC sweep: for each threshold t, counts hits and false
/// positives by rescanning every candidate with probability >= t.
double brute_force_froc_score(const std::vector<CandidateRecord>& candidates, const ReferenceSet& references);


/// <w, batchnorm(x)> in double precision with batch statistics, one
/// (gamma, beta) per feature shared over its `order` orientation channels.
double batchnorm_probe_loss(const Tensor& w, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            std::size_t order, double epsilon);

}  // namespace octoconv::testing
