// SPDX-License-Identifier: Apache-2.0
#include "octoconv/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "octoconv/error.hpp"

namespace octoconv {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("beta1 and beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

std::optional<std::size_t> TrainReport::epochs_to_reach(double reference) const {
  for (const auto& e : epochs)
    if (e.val_loss <= reference) return e.epoch;
  return std::nullopt;
}

namespace {

std::vector<int> labels_of(const std::vector<const PatchSample*>& batch) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto* s : batch) labels.push_back(s->label);
  return labels;
}

std::vector<Tensor> snapshot(Model& model) {
  std::vector<Tensor> s;
  for (auto& p : model.parameters()) s.push_back(*p.value);
  for (auto& b : model.buffers()) s.push_back(*b.second);
  return s;
}

void restore(Model& model, const std::vector<Tensor>& s) {
  std::size_t i = 0;
  for (auto& p : model.parameters()) *p.value = s[i++];
  for (auto& b : model.buffers()) *b.second = s[i++];
}

}  // namespace

double evaluate_loss(Model& model, const std::vector<PatchSample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate_loss: empty dataset");
  double total = 0.0;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    std::vector<const PatchSample*> batch;
    for (std::size_t i = begin; i < std::min(samples.size(), begin + batch_size); ++i) batch.push_back(&samples[i]);
    const Tensor logits = model.forward(stack_batch(batch), Mode::kEval);
    total += softmax_cross_entropy(logits, labels_of(batch)).loss * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(samples.size());
}

std::vector<double> predict_probabilities(Model& model, const std::vector<PatchSample>& samples,
                                          std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    std::vector<const PatchSample*> batch;
    for (std::size_t i = begin; i < std::min(samples.size(), begin + batch_size); ++i) batch.push_back(&samples[i]);
    const Tensor probs = softmax_rows(model.forward(stack_batch(batch), Mode::kEval));
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(probs.at({i, 1}));
  }
  return out;
}

TrainReport train(Model& model, const std::vector<PatchSample>& train_set, const std::vector<PatchSample>& val_set,
                  const TrainConfig& config, const AugmentPolicy& policy, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation set");

  Rng shuffle_rng(derive_seed(config.seed, 0x5b0f));
  Rng augment_rng(derive_seed(config.seed, 0xa06));
  Rng dropout_rng(derive_seed(config.seed, 0xd40));
  AdamState adam;
  const AdamHyper hyper = config.adam();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  std::vector<Tensor> best;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double train_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<PatchSample> augmented;
      std::vector<const PatchSample*> batch;
      if (config.augment) {
        augmented.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) augmented.push_back(augment(train_set[order[i]], augment_rng, policy));
        for (const auto& s : augmented) batch.push_back(&s);
      } else {
        for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);
      }

      model.zero_grad();
      const Tensor logits = model.forward(stack_batch(batch), Mode::kTrain, &dropout_rng);
      const LossAndGrad lg = softmax_cross_entropy(logits, labels_of(batch));
      if (!std::isfinite(lg.loss))
        throw NonFiniteLossError("non-finite training loss at epoch " + std::to_string(epoch) + ", sample offset " +
                                 std::to_string(begin));
      model.backward(lg.grad);
      adam_step(model.parameters(), adam, hyper);
      train_total += lg.loss * static_cast<double>(batch.size());
    }

    const EpochRecord record{epoch, train_total / static_cast<double>(train_set.size()), evaluate_loss(model, val_set)};
    if (!std::isfinite(record.val_loss))
      throw NonFiniteLossError("non-finite validation loss at epoch " + std::to_string(epoch));
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (report.best_epoch == 0 || record.val_loss < report.best_val_loss) {
      report.best_epoch = epoch;
      report.best_val_loss = record.val_loss;
      best = snapshot(model);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  restore(model, best);
  return report;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.8f,%.8f\n", e.epoch, e.train_loss, e.val_loss);
    out << buf;
  }
}

}  // namespace octoconv
