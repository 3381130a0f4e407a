// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "octoconv/checkpoint.hpp"
#include "octoconv/config.hpp"
#include "octoconv/dataset_io.hpp"
#include "octoconv/volume_io.hpp"
#include "test_support.hpp"

namespace octoconv {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("octoconv_io_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using VolumeIo = TempDir;
using DatasetIo = TempDir;
using CheckpointIo = TempDir;

TEST_F(VolumeIo, RoundTrip) {
  Rng rng(1);
  Volume v{testing::random_tensor({1, 2, 3, 4, 5}, rng), {1.25, 0.5, 0.75}};
  write_volume(dir_ / "vol.raw", v);
  EXPECT_TRUE(fs::exists(dir_ / "vol.meta"));
  const Volume back = read_volume(dir_ / "vol");
  EXPECT_EQ(back.data, v.data);
  EXPECT_EQ(back.spacing_mm, v.spacing_mm);
  EXPECT_EQ(fs::file_size(dir_ / "vol.raw"), v.data.size() * 4);
}

TEST_F(VolumeIo, BadMeta) {
  std::ofstream(dir_ / "a.meta") << "shape: 1 2 3\nspacing_mm: 1 1 1\n";
  std::ofstream(dir_ / "a.raw");
  try {
    read_volume(dir_ / "a");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  std::ofstream(dir_ / "b.meta") << "shape: 1 1 1 1 2\nspacing_mm: 1 1 1\n";
  std::ofstream(dir_ / "b.raw") << "abcd";
  EXPECT_ANY_THROW(read_volume(dir_ / "b"));
}

TEST(Float32, LittleEndianBytes) {
  std::ostringstream out;
  const float v[] = {1.0f};
  write_f32_le(out, v);
  EXPECT_EQ(out.str(), std::string("\x00\x00\x80\x3f", 4));
}

TEST_F(DatasetIo, SplitRoundTrip) {
  DatasetConfig cfg = DatasetConfig::desk();
  cfg.train_sizes = {30};
  cfg.val_size = 5;
  cfg.test_size = 5;
  const Datasets ds = build_datasets(3, cfg);
  write_split(dir_ / "train", ds.train.at(30), cfg.spacing_mm);
  const auto back = read_split(dir_ / "train");
  ASSERT_EQ(back.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(back[i].volume, ds.train.at(30)[i].volume);
    EXPECT_EQ(back[i].label, ds.train.at(30)[i].label);
    EXPECT_EQ(back[i].malignant, ds.train.at(30)[i].malignant);
    EXPECT_EQ(back[i].meta.kind, ds.train.at(30)[i].meta.kind);
  }
}

TEST_F(DatasetIo, ConfigRoundTrip) {
  DatasetConfig cfg = DatasetConfig::desk();
  cfg.val_size = 77;
  cfg.domain_shift = 0.25;
  cfg.train_sizes = {30, 90};
  {
    std::ofstream out(dir_ / "dataset.cfg");
    write_dataset_config(out, cfg);
  }
  const DatasetConfig back = read_dataset_config(dir_ / "dataset.cfg");
  EXPECT_EQ(back.val_size, 77u);
  EXPECT_EQ(back.domain_shift, 0.25);
  EXPECT_EQ(back.train_sizes, cfg.train_sizes);
  EXPECT_EQ(back.patch_shape, cfg.patch_shape);
  std::ofstream(dir_ / "bad.cfg") << "val_size = 10\nbogus = 3\n";
  try {
    read_dataset_config(dir_ / "bad.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_EQ(parse_patch_kind("vessel"), PatchKind::kVessel);
  EXPECT_THROW(parse_patch_kind("tumour"), std::invalid_argument);
}

TEST(Config, ParsesKeysAndComments) {
  ModelConfig m;
  TrainConfig t;
  apply_config_text("# comment\ngroup_name = O\n\nbase_widths = 4,4,8,8,16,16\nalpha = 0.003  # lr\n"
                    "augment = false\nmax_epochs = 7\ninput_shape = 1,8,8,8\n",
                    "cfg", m, t);
  EXPECT_EQ(m.group_name, GroupName::kO);
  EXPECT_EQ(m.base_widths, (std::vector<std::size_t>{4, 4, 8, 8, 16, 16}));
  EXPECT_EQ(m.input_shape, (std::array<std::size_t, 4>{1, 8, 8, 8}));
  EXPECT_EQ(t.alpha, 0.003);
  EXPECT_FALSE(t.augment);
  EXPECT_EQ(t.max_epochs, 7u);
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) -> std::size_t {
    ModelConfig m;
    TrainConfig t;
    try {
      apply_config_text(text, "cfg", m, t);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("alpha = 0.1\nlearning_rate = 3\n"), 2u);
  EXPECT_EQ(line_of("alpha = 0.1\n\nalpha = 0.2\n"), 3u);
  EXPECT_EQ(line_of("batch_size = -3\n"), 1u);
  EXPECT_EQ(line_of("augment = maybe\n"), 1u);
  EXPECT_EQ(line_of("group_name = C7\n"), 1u);
  EXPECT_EQ(line_of("kernel = 3,3\n"), 1u);
  EXPECT_EQ(line_of("just words\n"), 1u);
  ModelConfig m;
  EXPECT_THROW(apply_model_config_text("alpha = 0.1\n", "cfg", m), ParseError);
}

TEST(Config, WriteThenReadIsIdentity) {
  ModelConfig m = ModelConfig::desk(GroupName::kD4h);
  m.dropout_p = 0.125f;
  TrainConfig t;
  t.alpha = 3e-4;
  t.seed = 99;
  std::ostringstream out;
  write_model_config(out, m);
  write_train_config(out, t);
  ModelConfig m2;
  TrainConfig t2;
  apply_config_text(out.str(), "round", m2, t2);
  EXPECT_EQ(m2.group_name, m.group_name);
  EXPECT_EQ(m2.widths(), m.widths());
  EXPECT_EQ(m2.dropout_p, m.dropout_p);
  EXPECT_EQ(m2.pool_after, m.pool_after);
  EXPECT_EQ(t2.alpha, t.alpha);
  EXPECT_EQ(t2.seed, t.seed);
}

TEST(TrainConfigValidate, RejectsZeroBatchAndPatience) {
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.patience = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST_F(CheckpointIo, RoundTripPreservesOutputs) {
  ModelConfig cfg = ModelConfig::desk(GroupName::kD4);
  Model m = build_model(cfg, 12);
  Rng rng(13);
  for (auto& bn : m.norms) bn.running_mean = testing::random_tensor(bn.running_mean.shape(), rng);
  save_checkpoint(dir_ / "ck.bin", m);
  Model back = load_checkpoint(dir_ / "ck.bin");
  EXPECT_EQ(back.config().group_name, GroupName::kD4);
  const Tensor x = testing::random_tensor({2, 1, 6, 24, 24}, rng);
  EXPECT_EQ(back.forward(x, Mode::kEval), m.forward(x, Mode::kEval));
  auto a = m.buffers();
  auto b = back.buffers();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *b[i].second) << a[i].first;
}

TEST_F(CheckpointIo, RejectsDamagedFiles) {
  Model m = build_model(ModelConfig::desk(GroupName::kTrivial), 1);
  std::ostringstream out;
  save_checkpoint(out, m);
  const std::string bytes = out.str();
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 10));
    EXPECT_THROW(load_checkpoint(in), ParseError);
  }
  {
    std::istringstream in("not a checkpoint\n");
    EXPECT_THROW(load_checkpoint(in), ParseError);
  }
  {
    std::string edited = bytes;
    const auto pos = edited.find("tensor conv1");
    ASSERT_NE(pos, std::string::npos);
    edited.replace(pos, 12, "tensor convX");
    std::istringstream in(edited);
    EXPECT_THROW(load_checkpoint(in), ParseError);
  }
  EXPECT_THROW(load_checkpoint(dir_ / "missing.bin"), ParseError);
}

}  // namespace
}  // namespace octoconv
