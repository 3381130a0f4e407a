// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "octoconv/model.hpp"
#include "octoconv/synth.hpp"

namespace octoconv {

struct TrainConfig {
  std::size_t batch_size = 30;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_epochs = 100;
  /// Epochs without a new best validation loss before stopping.
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool augment = true;

  AdamHyper adam() const { return {alpha, beta1, beta2, epsilon}; }
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;

  /// First epoch whose validation loss is <= reference, if any.
  std::optional<std::size_t> epochs_to_reach(double reference) const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on softmax cross-entropy with per-epoch validation and
/// early stopping; the best-validation parameters are restored on return.
/// Throws NonFiniteLossError if a batch loss is NaN or infinite.
TrainReport train(Model& model, const std::vector<PatchSample>& train_set, const std::vector<PatchSample>& val_set,
                  const TrainConfig& config, const AugmentPolicy& policy = AugmentPolicy::standard(),
                  const EpochCallback& on_epoch = {});

/// Mean cross-entropy in eval mode.
double evaluate_loss(Model& model, const std::vector<PatchSample>& samples, std::size_t batch_size = 100);

/// Softmax probability of class 1 for each sample, eval mode.
std::vector<double> predict_probabilities(Model& model, const std::vector<PatchSample>& samples,
                                          std::size_t batch_size = 100);

/// `epoch,train_loss,val_loss`
void write_report_csv(std::ostream& out, const TrainReport& report);

}  // namespace octoconv
