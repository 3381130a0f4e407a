// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "octoconv/froc.hpp"
#include "octoconv/group.hpp"
#include "octoconv/layers.hpp"
#include "octoconv/model.hpp"
#include "octoconv/rng.hpp"

namespace octoconv::testing {

struct GroupFixture {
  explicit GroupFixture(GroupName name) : group(build_group(name)), rho(derive_rho(group)) {}
  SymmetryGroup group;
  PermutationRep rho;
};

// Stack of gconv layers with ReLU in between.
struct GConvStack {
  std::vector<GConvLayer> layers;
  Tensor operator()(const Tensor& x) const;
};

/// Integer stacks use sparse {-1, 0, 1} higher-layer filters and small
/// integer biases; float stacks use Xavier-scaled filters.
GConvStack make_gconv_stack(const GroupFixture& g, std::size_t depth, bool integer, Rng& rng);

/// max over h of |f(h x) - rho(h) h f(x)|, with h applied by the naive rotation.
double worst_equivariance_error(const GroupFixture& g, const GConvStack& f, const Tensor& x);

/// Random gamma, beta, running statistics and conv biases.
void randomize_norms(Model& m, Rng& rng);

/// The desk architecture written directly with plain conv, batch norm
/// arithmetic, ReLU, pooling and a dense loop.
Tensor plain_cnn(const Model& m, const Tensor& x);

/// Per conv layer: weights + one bias per feature; per norm: gamma and beta;
/// head: flattened features x 2 classes + 2.
std::size_t hand_count(const std::vector<std::size_t>& widths, std::size_t order, std::size_t head_voxels);

struct FrocFixture {
  ReferenceSet ref;
  std::vector<CandidateRecord> cands;
};

ReferenceNodule make_nodule(std::string scan, std::array<double, 3> c, double d, bool relevant = true,
                            bool malignant = false);

/// 1-4 scans, up to 8 findings, up to 39 candidates on a coarse probability
/// grid so ties occur.
FrocFixture random_froc_fixture(std::uint64_t seed);

/// Ten findings on one scan, found with descending probability; the
/// malignant ones sit at ranks 2, 4 and 8. Hand counts: top-5 finds 2,
/// top-10 finds 3.
FrocFixture malignancy_fixture();

}  // namespace octoconv::testing
