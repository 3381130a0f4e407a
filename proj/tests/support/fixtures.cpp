// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <cmath>

#include "octoconv/filter_transform.hpp"
#include "octoconv/ops.hpp"
#include "test_support.hpp"

namespace octoconv::testing {

Tensor GConvStack::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = gconv_forward(layers[i], h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

GConvStack make_gconv_stack(const GroupFixture& g, std::size_t depth, bool integer, Rng& rng) {
  GConvStack s;
  for (std::size_t i = 0; i < depth; ++i) {
    GConvLayer l(g.group, g.rho, i == 0 ? 1 : 2, 2, {3, 3, 3}, i == 0);
    if (integer) {
      for (float& v : l.filters.data()) v = rng.bernoulli(i == 0 ? 1.0 : 0.1) ? float(rng.integer(-1, 1)) : 0.0f;
      l.bias = random_int_tensor(l.bias.shape(), rng, -2, 2);
    } else {
      const double bound = std::sqrt(6.0 / double(l.fan_in() + l.fan_out()));
      l.filters = random_tensor(l.filters.shape(), rng, float(-bound), float(bound));
      l.bias = random_tensor(l.bias.shape(), rng, -0.1f, 0.1f);
    }
    s.layers.push_back(std::move(l));
  }
  return s;
}

double worst_equivariance_error(const GroupFixture& g, const GConvStack& f, const Tensor& x) {
  const Tensor fx = f(x);
  double worst = 0.0;
  for (std::size_t h = 0; h < g.group.order(); ++h) {
    const Tensor lhs = f(naive_rotate_volume(g.group.element(h), x));
    const Tensor rhs = permute_orientation_channels(naive_rotate_volume(g.group.element(h), fx), g.rho.perms[h]);
    worst = std::max(worst, double(max_abs_diff(lhs, rhs)));
  }
  return worst;
}

void randomize_norms(Model& m, Rng& rng) {
  for (auto& bn : m.norms) {
    bn.gamma = random_tensor(bn.gamma.shape(), rng, 0.5f, 1.5f);
    bn.beta = random_tensor(bn.beta.shape(), rng, -0.2f, 0.2f);
    bn.running_mean = random_tensor(bn.running_mean.shape(), rng, -0.2f, 0.2f);
    bn.running_var = random_tensor(bn.running_var.shape(), rng, 0.5f, 2.0f);
  }
  for (auto& c : m.convs) c.bias = random_tensor(c.bias.shape(), rng, -0.1f, 0.1f);
}

Tensor plain_cnn(const Model& m, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor& f = m.convs[i].filters;
    const Tensor w = f.reshaped({f.dim(0), f.size() / (f.dim(0) * 27), 3, 3, 3});
    Tensor y = conv3d_forward(h, w, {{1, 1, 1}, Padding::kSame});
    const std::size_t vol = y.size() / (y.dim(0) * y.dim(1));
    const auto& bn = m.norms[i];
    for (std::size_t b = 0; b < y.dim(0); ++b)
      for (std::size_t c = 0; c < y.dim(1); ++c) {
        const float inv_std = static_cast<float>(1.0 / std::sqrt(double(bn.running_var[c]) + bn.epsilon));
        for (std::size_t v = 0; v < vol; ++v) {
          float& e = y[(b * y.dim(1) + c) * vol + v];
          e += m.convs[i].bias[c];
          e = bn.gamma[c] * ((e - bn.running_mean[c]) * inv_std) + bn.beta[c];
          e = e > 0.0f ? e : 0.0f;
        }
      }
    h = (i == 0 || i == 2 || i == 4) ? max_pool3d(y, {}).output : y;
  }
  const std::size_t n = h.dim(0), in = h.size() / n;
  Tensor logits({n, 2});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < 2; ++o) {
      float s = m.head.bias[o];
      for (std::size_t k = 0; k < in; ++k) s += m.head.weight[o * in + k] * h[b * in + k];
      logits[b * 2 + o] = s;
    }
  return logits;
}

std::size_t hand_count(const std::vector<std::size_t>& w, std::size_t order, std::size_t head_voxels) {
  std::size_t total = 0, in = 1;
  for (std::size_t i = 0; i < 6; ++i) {
    total += w[i] * in * 27 * (i == 0 ? 1 : order) + w[i];
    total += 2 * w[i];
    in = w[i];
  }
  return total + w[5] * head_voxels * 2 + 2;
}

ReferenceNodule make_nodule(std::string scan, std::array<double, 3> c, double d, bool relevant, bool malignant) {
  return {std::move(scan), c, d, relevant ? Relevance::kRelevant : Relevance::kIrrelevant, malignant};
}

FrocFixture random_froc_fixture(std::uint64_t seed) {
  Rng rng(seed);
  FrocFixture f;
  const std::size_t scans = 1 + rng.below(4);
  for (std::size_t s = 0; s < scans; ++s) f.ref.add_scan("scan" + std::to_string(s));
  const std::size_t findings = 1 + rng.below(8);
  for (std::size_t i = 0; i < findings; ++i) {
    const std::string scan = "scan" + std::to_string(rng.below(scans));
    f.ref.nodules.push_back(make_nodule(scan, {rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(0, 100)},
                                        rng.uniform(4, 20), i == 0 || rng.bernoulli(0.8), rng.bernoulli(0.4)));
  }
  const std::size_t n = rng.below(40);
  for (std::size_t i = 0; i < n; ++i) {
    CandidateRecord c;
    if (rng.bernoulli(0.5)) {
      const auto& t = f.ref.nodules[rng.below(f.ref.nodules.size())];
      c.scan_id = t.scan_id;
      for (int a = 0; a < 3; ++a) c.position_mm[a] = t.center_mm[a] + rng.uniform(-0.4, 0.4) * t.diameter_mm;
    } else {
      c.scan_id = "scan" + std::to_string(rng.below(scans));
      for (double& v : c.position_mm) v = rng.uniform(0, 100);
    }
    // Coarse grid so ties occur.
    c.probability = double(rng.below(20)) / 19.0;
    f.cands.push_back(c);
  }
  return f;
}

FrocFixture malignancy_fixture() {
  FrocFixture f;
  f.ref.add_scan("s");
  for (int i = 0; i < 10; ++i) {
    const bool malignant = i == 1 || i == 3 || i == 7;
    f.ref.nodules.push_back(make_nodule("s", {20.0 * i, 0, 0}, 6, true, malignant));
    f.cands.push_back({"s", {20.0 * i, 0, 0}, 0.95 - 0.05 * i});
  }
  f.cands.push_back({"s", {20.0 * 9 + 1, 0, 0}, 0.2});   // second hit on rank 10
  f.cands.push_back({"s", {500, 0, 0}, 0.99});           // false positive
  return f;
}

}  // namespace octoconv::testing
