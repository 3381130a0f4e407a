// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "octoconv/conv3d.hpp"
#include "octoconv/filter_transform.hpp"
#include "octoconv/layers.hpp"
#include "octoconv/rng.hpp"

namespace octoconv {
namespace {

Tensor uniform(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// Args: channels in, channels out, depth, height, width (batch 30).
void BM_Conv3dForward(benchmark::State& state) {
  Rng rng(1);
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  const Tensor x = uniform({30, cin, std::size_t(state.range(2)), std::size_t(state.range(3)), std::size_t(state.range(4))}, rng);
  const Tensor w = uniform({cout, cin, 3, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_forward(x, w, {{1, 1, 1}, Padding::kSame}));
}
BENCHMARK(BM_Conv3dForward)->Args({1, 8, 6, 24, 24})->Args({8, 8, 6, 24, 24})->Args({16, 16, 3, 12, 12})
    ->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  Rng rng(2);
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  const Shape spatial{std::size_t(state.range(2)), std::size_t(state.range(3)), std::size_t(state.range(4))};
  const Tensor x = uniform({30, cin, spatial[0], spatial[1], spatial[2]}, rng);
  const Tensor w = uniform({cout, cin, 3, 3, 3}, rng);
  const Tensor gy = uniform({30, cout, spatial[0], spatial[1], spatial[2]}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_backward(gy, x, w, {{1, 1, 1}, Padding::kSame}));
}
BENCHMARK(BM_Conv3dBackward)->Args({8, 8, 6, 24, 24})->Args({16, 16, 3, 12, 12})->Unit(benchmark::kMillisecond);

struct GroupCase {
  SymmetryGroup group;
  PermutationRep rho;
  explicit GroupCase(GroupName name) : group(build_group(name)), rho(derive_rho(group)) {}
};

const GroupName kGroups[] = {GroupName::kTrivial, GroupName::kD4, GroupName::kD4h, GroupName::kO, GroupName::kOh};

// Arg: group index into kGroups; a higher layer with 4 features in and out.
void BM_ExpandFilters(benchmark::State& state) {
  GroupCase g(kGroups[state.range(0)]);
  Rng rng(3);
  GConvLayer layer(g.group, g.rho, 4, 4, {3, 3, 3}, false);
  layer.filters = uniform(layer.filters.shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(expand_filters(layer.plan(), layer.filters));
  state.SetLabel(std::string(to_string(g.group.name())));
}
BENCHMARK(BM_ExpandFilters)->DenseRange(0, 4);

// gconv (transform + conv) against plain conv with the already expanded bank.
void BM_GConvVsExpanded(benchmark::State& state) {
  GroupCase g(kGroups[state.range(0)]);
  const bool expanded_only = state.range(1) != 0;
  Rng rng(4);
  GConvLayer layer(g.group, g.rho, 4, 4, {3, 3, 3}, false);
  layer.filters = uniform(layer.filters.shape(), rng);
  const Tensor x = uniform({30, layer.in_channels(), 3, 12, 12}, rng);
  const Tensor bank = expand_filters(layer.plan(), layer.filters);
  for (auto _ : state) {
    if (expanded_only)
      benchmark::DoNotOptimize(conv3d_forward(x, bank, layer.conv_spec()));
    else
      benchmark::DoNotOptimize(gconv_forward(layer, x));
  }
  state.SetLabel(std::string(to_string(g.group.name())) + (expanded_only ? " expanded" : " gconv"));
}
BENCHMARK(BM_GConvVsExpanded)->ArgsProduct({{1, 3}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace octoconv

BENCHMARK_MAIN();
