// SPDX-License-Identifier: Apache-2.0
#include "octoconv/experiment.hpp"

#include <stdexcept>

namespace octoconv {

ReferenceSet test_references(const std::vector<PatchSample>& test, const DatasetConfig& config) {
  ReferenceSet refs;
  for (std::size_t s = 0; s < std::min(config.test_scans, test.size()); ++s)
    refs.add_scan(locate_test_sample(s, config).scan_id);
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].label != 1) continue;
    const auto loc = locate_test_sample(i, config);
    const double d = test[i].meta.diameter_mm;
    const bool relevant = d >= kRelevantDiameterMinMm && d <= kRelevantDiameterMaxMm;
    refs.nodules.push_back({loc.scan_id, loc.position_mm, d, relevant ? Relevance::kRelevant : Relevance::kIrrelevant,
                            test[i].malignant});
  }
  return refs;
}

std::vector<CandidateRecord> test_candidates(const std::vector<double>& probabilities, const DatasetConfig& config) {
  std::vector<CandidateRecord> out;
  out.reserve(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto loc = locate_test_sample(i, config);
    out.push_back({loc.scan_id, loc.position_mm, probabilities[i]});
  }
  return out;
}

RunResult run_experiment(const ModelConfig& model_config, const TrainConfig& train_config,
                         const std::vector<PatchSample>& train_set, const Datasets& data,
                         const DatasetConfig& data_config, const AugmentPolicy& policy, const EpochCallback& on_epoch,
                         Model* trained) {
  Model model = build_model(model_config, train_config.seed);
  RunResult r;
  r.report = train(model, train_set, data.val, train_config, policy, on_epoch);
  r.candidates = test_candidates(predict_probabilities(model, data.test), data_config);
  const ReferenceSet refs = test_references(data.test, data_config);
  r.froc = froc_curve(match_candidates(r.candidates, refs));
  if (trained) *trained = std::move(model);
  return r;
}

}  // namespace octoconv
