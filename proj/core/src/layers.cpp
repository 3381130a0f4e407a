// SPDX-License-Identifier: Apache-2.0
#include "octoconv/layers.hpp"

#include <cmath>

namespace octoconv {

GConvLayer::GConvLayer(const SymmetryGroup& group, const PermutationRep& rho, std::size_t n_in,
                       std::size_t n_out, GridShape kernel, bool first_layer, Conv3dSpec conv)
    : n_in_(n_in), n_out_(n_out), plan_(build_plan(group, rho, kernel, first_layer)), conv_(conv) {
  if (n_in == 0 || n_out == 0) throw ShapeError("gconv layer needs at least one input and output feature");
  filters = Tensor(plan_.filter_shape(n_out, n_in));
  bias = Tensor({n_out});
}

std::size_t GConvLayer::fan_in() const { return in_channels() * plan_.kernel_volume(); }
std::size_t GConvLayer::fan_out() const { return out_channels() * plan_.kernel_volume(); }

Tensor gconv_forward(const GConvLayer& layer, const Tensor& input) {
  require_rank(input, 5, "gconv input");
  if (input.dim(1) != layer.in_channels())
    throw ShapeError("gconv: input has " + std::to_string(input.dim(1)) + " channels, layer expects " +
                     std::to_string(layer.in_channels()));
  Tensor out = conv3d_forward(input, expand_filters(layer.plan(), layer.filters), layer.conv_spec());
  const std::size_t G = layer.group_order();
  const std::size_t vol = out.dim(2) * out.dim(3) * out.dim(4);
  const std::size_t channels = out.dim(1);
  for (std::size_t n = 0; n < out.dim(0); ++n)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const float b = layer.bias[ch / G];
      float* p = out.ptr() + (n * channels + ch) * vol;
      for (std::size_t i = 0; i < vol; ++i) p[i] += b;
    }
  return out;
}

GConvGrads gconv_backward(const GConvLayer& layer, const Tensor& input, const Tensor& grad_out) {
  const Tensor expanded = expand_filters(layer.plan(), layer.filters);
  Conv3dGrads g = conv3d_backward(grad_out, input, expanded, layer.conv_spec());

  GConvGrads res;
  res.input = std::move(g.input);
  res.filters = reduce_expanded_grad(layer.plan(), g.filters, layer.filters.shape());
  res.bias = Tensor({layer.n_out()});
  const std::size_t G = layer.group_order();
  const std::size_t vol = grad_out.dim(2) * grad_out.dim(3) * grad_out.dim(4);
  const std::size_t channels = grad_out.dim(1);
  for (std::size_t n = 0; n < grad_out.dim(0); ++n)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const float* p = grad_out.ptr() + (n * channels + ch) * vol;
      double s = 0.0;
      for (std::size_t i = 0; i < vol; ++i) s += p[i];
      res.bias[ch / G] += static_cast<float>(s);
    }
  return res;
}

OrientationPoolResult orientation_pool(const Tensor& input, std::size_t group_order) {
  require_rank(input, 5, "orientation_pool input");
  const std::size_t G = group_order;
  if (G == 0 || input.dim(1) % G != 0)
    throw ShapeError("orientation_pool: " + std::to_string(input.dim(1)) +
                     " channels not divisible by group order " + std::to_string(G));
  const std::size_t n = input.dim(0), features = input.dim(1) / G;
  const std::size_t vol = input.dim(2) * input.dim(3) * input.dim(4);
  OrientationPoolResult res{Tensor({n, features, input.dim(2), input.dim(3), input.dim(4)}), {}};
  res.argmax.resize(res.output.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < features; ++f) {
      const std::size_t base = (b * features + f) * G * vol;
      for (std::size_t p = 0; p < vol; ++p) {
        std::size_t best = base + p;
        for (std::size_t o = 1; o < G; ++o) {
          const std::size_t idx = base + o * vol + p;
          if (input[idx] > input[best]) best = idx;
        }
        const std::size_t out_idx = (b * features + f) * vol + p;
        res.output[out_idx] = input[best];
        res.argmax[out_idx] = static_cast<std::uint32_t>(best);
      }
    }
  return res;
}

Tensor orientation_pool_backward(const Tensor& grad_out, const OrientationPoolResult& forward,
                                 const Shape& input_shape) {
  if (grad_out.shape() != forward.output.shape())
    throw ShapeError("orientation_pool_backward: gradient shape mismatch");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad[forward.argmax[i]] += grad_out[i];
  return grad;
}

EquivariantBatchNorm::EquivariantBatchNorm(std::size_t features, std::size_t group_order, float momentum_,
                                           float epsilon_)
    : gamma({features}, 1.0f), beta({features}, 0.0f), running_mean({features}, 0.0f),
      running_var({features}, 1.0f), batches_tracked({1}, 0.0f), momentum(momentum_), epsilon(epsilon_), group_order_(group_order) {}

namespace {

struct BnLayout {
  std::size_t n, features, block;  // block = |H| * spatial volume
};

BnLayout bn_layout(const EquivariantBatchNorm& bn, const Tensor& x) {
  require_rank(x, 5, "batchnorm input");
  if (x.dim(0) == 0) throw ShapeError("batchnorm on an empty batch");
  if (x.dim(1) != bn.features() * bn.group_order())
    throw ShapeError("batchnorm: input has " + std::to_string(x.dim(1)) + " channels, expected " +
                     std::to_string(bn.features() * bn.group_order()));
  return {x.dim(0), bn.features(), bn.group_order() * x.dim(2) * x.dim(3) * x.dim(4)};
}

}  // namespace

Tensor batchnorm_forward(EquivariantBatchNorm& bn, const Tensor& x, bool training, BatchNormCache* cache) {
  const BnLayout l = bn_layout(bn, x);
  Tensor out(x.shape());
  if (training && cache) {
    cache->x_hat = Tensor(x.shape());
    cache->inv_std.assign(l.features, 0.0f);
  }
  const double count = static_cast<double>(l.n * l.block);
  double weight = 0.0;
  if (training) {
    bn.batches_tracked[0] += 1.0f;
    weight = std::max<double>(bn.momentum, 1.0 / bn.batches_tracked[0]);
  }
  for (std::size_t f = 0; f < l.features; ++f) {
    double mu, var;
    if (training) {
      double s = 0.0, ss = 0.0;
      for (std::size_t b = 0; b < l.n; ++b) {
        const float* p = x.ptr() + (b * l.features + f) * l.block;
        for (std::size_t i = 0; i < l.block; ++i) s += p[i];
      }
      mu = s / count;
      for (std::size_t b = 0; b < l.n; ++b) {
        const float* p = x.ptr() + (b * l.features + f) * l.block;
        for (std::size_t i = 0; i < l.block; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      var = ss / count;
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      bn.running_mean[f] = static_cast<float>((1 - weight) * bn.running_mean[f] + weight * mu);
      bn.running_var[f] = static_cast<float>((1 - weight) * bn.running_var[f] + weight * unbiased);
    } else {
      mu = bn.running_mean[f];
      var = bn.running_var[f];
    }
    const float inv_std = static_cast<float>(1.0 / std::sqrt(var + bn.epsilon));
    const float mu_f = static_cast<float>(mu);
    if (training && cache) cache->inv_std[f] = inv_std;
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.features + f) * l.block;
      const float* p = x.ptr() + off;
      float* q = out.ptr() + off;
      for (std::size_t i = 0; i < l.block; ++i) {
        const float xh = (p[i] - mu_f) * inv_std;
        if (training && cache) cache->x_hat[off + i] = xh;
        q[i] = bn.gamma[f] * xh + bn.beta[f];
      }
    }
  }
  return out;
}

BatchNormGrads batchnorm_backward(const EquivariantBatchNorm& bn, const BatchNormCache& cache,
                                  const Tensor& grad_out) {
  const BnLayout l = bn_layout(bn, grad_out);
  if (cache.x_hat.shape() != grad_out.shape()) throw ShapeError("batchnorm_backward: cache shape mismatch");
  BatchNormGrads g{Tensor(grad_out.shape()), Tensor({l.features}), Tensor({l.features})};
  const double count = static_cast<double>(l.n * l.block);
  for (std::size_t f = 0; f < l.features; ++f) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.features + f) * l.block;
      for (std::size_t i = 0; i < l.block; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xh += static_cast<double>(grad_out[off + i]) * cache.x_hat[off + i];
      }
    }
    g.beta[f] = static_cast<float>(sum_dy);
    g.gamma[f] = static_cast<float>(sum_dy_xh);
    const double k = bn.gamma[f] * cache.inv_std[f];
    const double mean_dy = sum_dy / count, mean_dy_xh = sum_dy_xh / count;
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.features + f) * l.block;
      for (std::size_t i = 0; i < l.block; ++i)
        g.input[off + i] =
            static_cast<float>(k * (grad_out[off + i] - mean_dy - cache.x_hat[off + i] * mean_dy_xh));
    }
  }
  return g;
}

Tensor dropout_forward(const Tensor& x, float p, Rng& rng, DropoutCache* cache) {
  if (!(p >= 0.0f && p < 1.0f)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (p == 0.0f) {
    if (cache) cache->mask.assign(x.size(), 1.0f);
    return x;
  }
  const float keep_scale = 1.0f / (1.0f - p);
  Tensor out(x.shape());
  std::vector<float> mask(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.bernoulli(p) ? 0.0f : keep_scale;
    out[i] = x[i] * mask[i];
  }
  if (cache) cache->mask = std::move(mask);
  return out;
}

Tensor dropout_backward(const Tensor& grad_out, const DropoutCache& cache) {
  if (cache.mask.size() != grad_out.size()) throw ShapeError("dropout_backward: mask size mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= cache.mask[i];
  return g;
}

Dense::Dense(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}

Tensor dense_forward(const Dense& layer, const Tensor& x) {
  const std::size_t in = layer.weight.dim(1), outs = layer.weight.dim(0);
  if (x.rank() < 1 || x.size() % in != 0 || x.size() / in != x.dim(0))
    throw ShapeError("dense: input " + shape_string(x.shape()) + " does not flatten to " +
                     std::to_string(in) + " features");
  const std::size_t n = x.dim(0);
  Tensor y({n, outs});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < outs; ++o) {
      const float* w = layer.weight.ptr() + o * in;
      const float* xi = x.ptr() + b * in;
      float s = layer.bias[o];
      for (std::size_t i = 0; i < in; ++i) s += w[i] * xi[i];
      y[b * outs + o] = s;
    }
  return y;
}

DenseGrads dense_backward(const Dense& layer, const Tensor& x, const Tensor& grad_out) {
  const std::size_t in = layer.weight.dim(1), outs = layer.weight.dim(0);
  const std::size_t n = x.dim(0);
  if (grad_out.shape() != Shape{n, outs}) throw ShapeError("dense_backward: gradient shape mismatch");
  DenseGrads g{Tensor(x.shape()), Tensor(layer.weight.shape()), Tensor(layer.bias.shape())};
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < outs; ++o) {
      const float go = grad_out[b * outs + o];
      g.bias[o] += go;
      const float* w = layer.weight.ptr() + o * in;
      const float* xi = x.ptr() + b * in;
      float* gw = g.weight.ptr() + o * in;
      float* gx = g.input.ptr() + b * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += go * xi[i];
        gx[i] += go * w[i];
      }
    }
  return g;
}

}  // namespace octoconv
