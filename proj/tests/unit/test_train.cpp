// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "octoconv/experiment.hpp"
#include "octoconv/train.hpp"

namespace octoconv {
namespace {

struct Data {
  Data() {
    DatasetConfig cfg = DatasetConfig::desk();
    cfg.train_sizes = {30};
    cfg.val_size = 20;
    cfg.test_size = 40;
    cfg.test_scans = 10;
    config = cfg;
    sets = build_datasets(7, cfg);
  }
  DatasetConfig config;
  Datasets sets;
};

const Data& data() {
  static const Data d;
  return d;
}

TEST(Train, OneEpochSmoke) {
  Model m = build_model(ModelConfig::desk(GroupName::kTrivial), 1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  std::size_t calls = 0;
  const TrainReport r = train(m, data().sets.train.at(30), data().sets.val, cfg, AugmentPolicy::standard(),
                              [&](const EpochRecord&) { ++calls; });
  ASSERT_EQ(r.epochs.size(), 1u);
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(r.epochs[0].epoch, 1u);
  EXPECT_TRUE(std::isfinite(r.epochs[0].train_loss));
  EXPECT_TRUE(std::isfinite(r.epochs[0].val_loss));
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(Train, MemorizesThirtySamples) {
  Model m = build_model(ModelConfig::desk(GroupName::kTrivial), 2);
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.augment = false;
  const auto& set = data().sets.train.at(30);
  const TrainReport r = train(m, set, set, cfg, AugmentPolicy::none());
  double best = 1e9;
  for (const auto& e : r.epochs) best = std::min(best, e.train_loss);
  EXPECT_LT(best, 0.1);
  EXPECT_LT(r.epochs.back().train_loss, r.epochs.front().train_loss);
}

TEST(Train, SameSeedSameCurves) {
  for (GroupName g : {GroupName::kTrivial, GroupName::kD4}) {
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.seed = 11;
    Model a = build_model(ModelConfig::desk(g), cfg.seed), b = build_model(ModelConfig::desk(g), cfg.seed);
    const TrainReport ra = train(a, data().sets.train.at(30), data().sets.val, cfg);
    const TrainReport rb = train(b, data().sets.train.at(30), data().sets.val, cfg);
    std::ostringstream sa, sb;
    write_report_csv(sa, ra);
    write_report_csv(sb, rb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.head.weight, b.head.weight);
  }
}

TEST(Train, RestoresBestEpoch) {
  Model m = build_model(ModelConfig::desk(GroupName::kTrivial), 3);
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.patience = 3;
  cfg.alpha = 0.02;
  const TrainReport r = train(m, data().sets.train.at(30), data().sets.val, cfg);
  ASSERT_GE(r.best_epoch, 1u);
  double best = 1e9;
  for (const auto& e : r.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(r.best_val_loss, best);
  EXPECT_EQ(r.epochs[r.best_epoch - 1].val_loss, best);
  EXPECT_NEAR(evaluate_loss(m, data().sets.val), best, 1e-9);
  if (r.epochs.size() < cfg.max_epochs) {
    EXPECT_TRUE(r.stopped_early);
    EXPECT_EQ(r.epochs.size(), r.best_epoch + cfg.patience);
  }
}

TEST(Train, EpochsToReach) {
  TrainReport r;
  r.epochs = {{1, 1.0, 0.9}, {2, 0.8, 0.7}, {3, 0.6, 0.5}, {4, 0.5, 0.6}};
  EXPECT_EQ(r.epochs_to_reach(0.7), 2u);
  EXPECT_EQ(r.epochs_to_reach(0.5), 3u);
  EXPECT_FALSE(r.epochs_to_reach(0.4).has_value());
  std::ostringstream out;
  write_report_csv(out, r);
  EXPECT_EQ(out.str().rfind("epoch,train_loss,val_loss\n1,1.00000000,0.90000000\n2,", 0), 0u);
}

TEST(Train, NonFiniteLossThrows) {
  Model m = build_model(ModelConfig::desk(GroupName::kTrivial), 4);
  m.head.bias[0] = std::nanf("");
  TrainConfig cfg;
  cfg.max_epochs = 1;
  EXPECT_THROW(train(m, data().sets.train.at(30), data().sets.val, cfg, AugmentPolicy::none()), NonFiniteLossError);
}

TEST(Train, PredictionsAndExperimentScoring) {
  ModelConfig mc = ModelConfig::desk(GroupName::kTrivial);
  TrainConfig tc;
  tc.max_epochs = 2;
  const RunResult r = run_experiment(mc, tc, data().sets.train.at(30), data().sets, data().config);
  ASSERT_EQ(r.candidates.size(), 40u);
  for (const auto& c : r.candidates) {
    EXPECT_GE(c.probability, 0.0);
    EXPECT_LE(c.probability, 1.0);
  }
  EXPECT_EQ(r.froc.n_scans, 10u);
  const ReferenceSet ref = test_references(data().sets.test, data().config);
  std::size_t positives = 0;
  for (const auto& s : data().sets.test)
    positives += s.label == 1 && s.meta.diameter_mm >= kRelevantDiameterMinMm &&
                 s.meta.diameter_mm <= kRelevantDiameterMaxMm;
  EXPECT_EQ(ref.relevant_count(), positives);
  EXPECT_GE(r.froc.overall_score, 0.0);
  EXPECT_LE(r.froc.overall_score, 1.0);
}

}  // namespace
}  // namespace octoconv
