// SPDX-License-Identifier: Apache-2.0
#include "octoconv/model.hpp"

#include <algorithm>
#include <cmath>

namespace octoconv {

namespace {

constexpr std::size_t kConvLayers = 6;
const Pool3dSpec kPool{};

bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Spatial extent after the pooling pyramid; throws if an axis gets too small.
std::array<std::size_t, 3> head_spatial(const ModelConfig& c) {
  std::array<std::size_t, 3> s{c.input_shape[1], c.input_shape[2], c.input_shape[3]};
  for (std::size_t layer = 1; layer <= kConvLayers; ++layer) {
    if (!contains(c.pool_after, layer)) continue;
    for (int a = 0; a < 3; ++a) {
      if (s[a] < kPool.window[a])
        throw ShapeError("input " + shape_string({c.input_shape[1], c.input_shape[2], c.input_shape[3]}) +
                         " too small for the pooling pyramid");
      s[a] = window_geometry(s[a], kPool.window[a], kPool.stride[a], kPool.padding).out;
    }
  }
  return s;
}

}  // namespace

std::size_t scaled_width(std::size_t base, std::size_t group_order) {
  const double w = std::round(static_cast<double>(base) / std::sqrt(static_cast<double>(group_order)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(w));
}

std::vector<std::size_t> ModelConfig::widths() const {
  const std::size_t order = expected_order(group_name);
  std::vector<std::size_t> w;
  for (std::size_t b : base_widths) w.push_back(scale_widths ? scaled_width(b, order) : b);
  return w;
}

void ModelConfig::validate() const {
  if (base_widths.size() != kConvLayers) throw std::invalid_argument("base_widths needs 6 entries");
  for (std::size_t w : base_widths)
    if (w == 0) throw std::invalid_argument("base_widths must be positive");
  for (std::size_t k : kernel)
    if (k % 2 == 0) throw std::invalid_argument("kernel dims must be odd");
  if (input_shape[0] == 0) throw std::invalid_argument("input needs at least one channel");
  if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  if (!(dropout_p >= 0.0f && dropout_p < 1.0f)) throw std::invalid_argument("dropout_p must be in [0, 1)");
  for (std::size_t l : pool_after)
    if (l < 1 || l > kConvLayers) throw std::invalid_argument("pool_after entries must be in 1..6");
  for (std::size_t l : dropout_after)
    if (l < 1 || l > kConvLayers) throw std::invalid_argument("dropout_after entries must be in 1..6");
  head_spatial(*this);
}

ModelConfig ModelConfig::desk(GroupName group) {
  ModelConfig c;
  c.group_name = group;
  return c;
}

ModelConfig ModelConfig::paper_shape(GroupName group) {
  ModelConfig c;
  c.group_name = group;
  c.base_widths = {16, 16, 32, 32, 64, 64};
  c.input_shape = {1, 12, 72, 72};
  return c;
}

std::size_t count_parameters(const ModelConfig& config) {
  config.validate();
  const std::size_t order = expected_order(config.group_name);
  const auto w = config.widths();
  const std::size_t kvol = config.kernel[0] * config.kernel[1] * config.kernel[2];
  std::size_t total = 0, n_in = config.input_shape[0];
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    total += w[i] * n_in * (i == 0 ? 1 : order) * kvol + w[i];  // filters + bias
    total += 2 * w[i];                                          // BN gamma, beta
    n_in = w[i];
  }
  const auto s = head_spatial(config);
  total += (w.back() * s[0] * s[1] * s[2] + 1) * config.n_classes;
  return total;
}

Model::Model(ModelConfig config)
    : head(1, 1), config_(std::move(config)), group_(build_group(config_.group_name)), rho_(derive_rho(group_)) {
  config_.validate();
  widths_ = config_.widths();
  const std::size_t order = group_.order();
  std::size_t n_in = config_.input_shape[0];
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    convs.emplace_back(group_, rho_, n_in, widths_[i], config_.kernel, i == 0);
    norms.emplace_back(widths_[i], order);
    n_in = widths_[i];
  }
  const auto s = head_spatial(config_);
  head = Dense(widths_.back() * s[0] * s[1] * s[2], config_.n_classes);
  zero_grad();
}

Tensor Model::forward(const Tensor& x, Mode mode, Rng* rng) {
  require_rank(x, 5, "model input");
  const Shape expected{x.dim(0), config_.input_shape[0], config_.input_shape[1], config_.input_shape[2],
                       config_.input_shape[3]};
  if (x.shape() != expected)
    throw ShapeError("model input " + shape_string(x.shape()) + " does not match configured " +
                     shape_string(expected));
  const bool training = mode == Mode::kTrain;
  if (training && !rng && config_.dropout_p > 0.0f && !config_.dropout_after.empty())
    throw std::invalid_argument("training forward needs an rng for dropout");

  if (training) cache_.assign(kConvLayers, StageCache{});
  has_cache_ = false;

  Tensor h = x;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    StageCache* c = training ? &cache_[i] : nullptr;
    Tensor conv = gconv_forward(convs[i], h);
    if (c) c->conv_in = std::move(h);
    Tensor bn = batchnorm_forward(norms[i], conv, training, c ? &c->bn : nullptr);
    h = relu(bn);
    if (c) c->bn_out = std::move(bn);
    if (contains(config_.pool_after, i + 1)) {
      MaxPoolResult pr = max_pool3d(h, kPool);
      if (c) {
        c->pooled = true;
        c->pool_in_shape = h.shape();
      }
      h = pr.output;
      if (c) c->pool = std::move(pr);
    }
    if (training && contains(config_.dropout_after, i + 1)) {
      h = dropout_forward(h, config_.dropout_p, *rng, &c->dropout);
      c->dropped = true;
    }
  }

  OrientationPoolResult op = orientation_pool(h, group_.order());
  const std::size_t n = x.dim(0);
  Tensor flat = op.output.reshaped({n, op.output.size() / n});
  Tensor logits = dense_forward(head, flat);
  if (training) {
    head_pool_in_shape_ = h.shape();
    head_pool_ = std::move(op);
    head_in_ = std::move(flat);
    has_cache_ = true;
  }
  return logits;
}

void Model::backward(const Tensor& grad_logits) {
  if (!has_cache_) throw std::logic_error("backward() without a preceding training forward()");
  DenseGrads dg = dense_backward(head, head_in_, grad_logits);
  add_inplace(head_grads_.weight, dg.weight);
  add_inplace(head_grads_.bias, dg.bias);

  Tensor g = orientation_pool_backward(dg.input.reshaped(head_pool_.output.shape()), head_pool_,
                                       head_pool_in_shape_);
  for (std::size_t i = kConvLayers; i-- > 0;) {
    StageCache& c = cache_[i];
    if (c.dropped) g = dropout_backward(g, c.dropout);
    if (c.pooled) g = max_pool3d_backward(g, c.pool, c.pool_in_shape);
    g = relu_backward(g, c.bn_out);
    BatchNormGrads bg = batchnorm_backward(norms[i], c.bn, g);
    add_inplace(bn_grads_[i].gamma, bg.gamma);
    add_inplace(bn_grads_[i].beta, bg.beta);
    GConvGrads cg = gconv_backward(convs[i], c.conv_in, bg.input);
    add_inplace(conv_grads_[i].filters, cg.filters);
    add_inplace(conv_grads_[i].bias, cg.bias);
    g = std::move(cg.input);
  }
}

void Model::zero_grad() {
  conv_grads_.clear();
  bn_grads_.clear();
  for (std::size_t i = 0; i < convs.size(); ++i) {
    conv_grads_.push_back({Tensor(), Tensor(convs[i].filters.shape()), Tensor(convs[i].bias.shape())});
    bn_grads_.push_back({Tensor(), Tensor(norms[i].gamma.shape()), Tensor(norms[i].beta.shape())});
  }
  head_grads_ = {Tensor(), Tensor(head.weight.shape()), Tensor(head.bias.shape())};
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> p;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const std::string tag = std::to_string(i + 1);
    p.push_back({"conv" + tag + ".filters", &convs[i].filters, &conv_grads_[i].filters});
    p.push_back({"conv" + tag + ".bias", &convs[i].bias, &conv_grads_[i].bias});
    p.push_back({"bn" + tag + ".gamma", &norms[i].gamma, &bn_grads_[i].gamma});
    p.push_back({"bn" + tag + ".beta", &norms[i].beta, &bn_grads_[i].beta});
  }
  p.push_back({"head.weight", &head.weight, &head_grads_.weight});
  p.push_back({"head.bias", &head.bias, &head_grads_.bias});
  return p;
}

std::vector<std::pair<std::string, Tensor*>> Model::buffers() {
  std::vector<std::pair<std::string, Tensor*>> b;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const std::string tag = std::to_string(i + 1);
    b.emplace_back("bn" + tag + ".running_mean", &norms[i].running_mean);
    b.emplace_back("bn" + tag + ".running_var", &norms[i].running_var);
    b.emplace_back("bn" + tag + ".batches_tracked", &norms[i].batches_tracked);
  }
  return b;
}

std::size_t Model::parameter_count() const {
  std::size_t total = head.parameter_count();
  for (const auto& c : convs) total += c.parameter_count();
  for (const auto& n : norms) total += n.parameter_count();
  return total;
}

Tensor xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

Tensor xavier_uniform(const Shape& shape, Rng& rng) {
  if (shape.size() < 2) throw ShapeError("xavier_uniform needs at least 2 dims to infer fans");
  std::size_t receptive = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
  return xavier_uniform(shape, shape[1] * receptive, shape[0] * receptive, rng);
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  Model model(config);
  Rng rng(derive_seed(seed, 0x1417));
  for (auto& c : model.convs) c.filters = xavier_uniform(c.filters.shape(), c.fan_in(), c.fan_out(), rng);
  model.head.weight = xavier_uniform(model.head.weight.shape(), rng);
  return model;
}

void adam_step(const std::vector<ParamRef>& params, AdamState& state, const AdamHyper& hyper) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value->shape());
      state.v.emplace_back(p.value->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = *params[k].value;
    const Tensor& g = *params[k].grad;
    if (g.shape() != w.shape() || state.m[k].shape() != w.shape())
      throw ShapeError("adam_step: shape mismatch for " + params[k].name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double m = hyper.beta1 * state.m[k][i] + (1.0 - hyper.beta1) * gi;
      const double v = hyper.beta2 * state.v[k][i] + (1.0 - hyper.beta2) * gi * gi;
      state.m[k][i] = static_cast<float>(m);
      state.v[k][i] = static_cast<float>(v);
      w[i] = static_cast<float>(w[i] - hyper.alpha * (m / bc1) / (std::sqrt(v / bc2) + hyper.epsilon));
    }
  }
}

}  // namespace octoconv
