// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "octoconv/froc.hpp"
#include "octoconv/synth.hpp"
#include "octoconv/train.hpp"

namespace octoconv {

/// Findings of relevant size lie in [3, 30] mm diameter.
inline constexpr double kRelevantDiameterMinMm = 3.0;
inline constexpr double kRelevantDiameterMaxMm = 30.0;

/// One finding per positive test patch, placed at the patch's scan location.
/// Every test scan is listed, including scans without findings.
ReferenceSet test_references(const std::vector<PatchSample>& test, const DatasetConfig& config);

/// One candidate per test patch with the given probabilities.
std::vector<CandidateRecord> test_candidates(const std::vector<double>& probabilities, const DatasetConfig& config);

struct RunResult {
  TrainReport report;
  std::vector<CandidateRecord> candidates;
  FrocResult froc;
};

/// Trains a freshly initialized model on `train_set` and scores it on the
/// test split. Model weights are seeded from train.seed.
RunResult run_experiment(const ModelConfig& model_config, const TrainConfig& train_config,
                         const std::vector<PatchSample>& train_set, const Datasets& data,
                         const DatasetConfig& data_config, const AugmentPolicy& policy = AugmentPolicy::standard(),
                         const EpochCallback& on_epoch = {}, Model* trained = nullptr);

}  // namespace octoconv
