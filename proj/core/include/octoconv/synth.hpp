// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "octoconv/rng.hpp"
#include "octoconv/tensor.hpp"

namespace octoconv {

enum class PatchKind { kNodule, kVessel, kBorderBlob, kNoise };

std::string_view to_string(PatchKind kind);

struct PatchMeta {
  PatchKind kind = PatchKind::kNoise;
  double diameter_mm = 0.0;
  /// Structure center relative to the patch center, (z, y, x) in mm.
  std::array<double, 3> offset_mm{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;
};

struct PatchSample {
  Tensor volume;  // [1, D, H, W], values in [-1, 1]
  int label = 0;  // 1 = nodule
  bool malignant = false;
  PatchMeta meta;
};

/// Distribution parameters of one generator domain. The evaluation domain
/// uses shifted parameters to emulate a change of scanner population.
struct GeneratorDomain {
  double nodule_diameter_min_mm = 4.0;
  double nodule_diameter_max_mm = 10.0;
  double malignant_diameter_min_mm = 7.0;
  double peak_hu_min = -150.0;
  double peak_hu_max = 100.0;
  double background_hu = -850.0;
  double background_sigma_hu = 60.0;
  double noise_texture_sigma_hu = 140.0;

  static GeneratorDomain training();
  /// Interpolates toward the shifted evaluation domain; shift = 0 is training.
  static GeneratorDomain evaluation(double shift);
};

struct DatasetConfig {
  std::array<std::size_t, 3> patch_shape{6, 24, 24};  // (D, H, W)
  std::array<double, 3> spacing_mm{1.25, 0.5, 0.5};  // (z, y, x)
  std::vector<std::size_t> train_sizes{30, 300, 3000};
  double train_positive_fraction = 0.5;
  std::size_t val_size = 100;
  double val_positive_fraction = 0.206;
  std::size_t test_size = 800;
  double test_positive_fraction = 0.133;
  /// Smaller training sets are prefixes of larger ones.
  bool nested = true;
  double malignancy_fraction = 0.3;
  double domain_shift = 1.0;
  /// Test candidates are spread over this many synthetic scans.
  std::size_t test_scans = 100;

  static DatasetConfig desk();
  static DatasetConfig paper_shape();
};

/// HU window [-1000, 300] mapped linearly onto [-1, 1], clamped.
float normalize_hu(double hu);

PatchSample generate_patch(Rng& rng, int label, const DatasetConfig& config, const GeneratorDomain& domain,
                           bool malignant = false);

struct AugmentPolicy {
  bool rotate = true;     // continuous rotation about z, 0..360 degrees
  bool reflect = true;    // each axis independently with probability 1/2
  bool translate = true;  // integer shifts of up to max_translation voxels
  bool scale = true;      // isotropic, scale_min..scale_max
  bool noise = true;      // additive gaussian
  bool remap = true;      // v -> sign(v) |v|^gamma
  int max_translation = 2;
  double scale_min = 0.8, scale_max = 1.2;
  double noise_sigma = 0.05;
  double gamma_min = 0.8, gamma_max = 1.25;

  static AugmentPolicy none();
  static AugmentPolicy standard() { return {}; }
};

PatchSample augment(const PatchSample& sample, Rng& rng, const AugmentPolicy& policy);

/// Trilinear resampling of every channel of a [c, D, H, W] volume:
/// out(p) = in(R^-1 (p - c) / scale + c) with R the in-plane rotation by
/// angle_rad about z (x toward y). Taps outside the volume read `fill`.
Tensor rotate_scale_z(const Tensor& volume, double angle_rad, double scale, float fill);

/// Integer translation with background fill; shift is (z, y, x).
Tensor translate(const Tensor& volume, std::array<int, 3> shift, float fill);
Tensor reflect(const Tensor& volume, int axis);

struct Datasets {
  /// Keyed by training-set size.
  std::map<std::size_t, std::vector<PatchSample>> train;
  std::vector<PatchSample> val;
  std::vector<PatchSample> test;
};

/// Deterministic dataset family: sample i of each split draws from its own
/// stream derived from (master_seed, split, i).
Datasets build_datasets(std::uint64_t master_seed, const DatasetConfig& config);

/// Number of positives in a split: floor(size * fraction).
std::size_t positive_count(std::size_t size, double fraction);

/// Where a test patch sits in its synthetic scan.
struct CandidateLocation {
  std::string scan_id;
  std::array<double, 3> position_mm{};  // (x, y, z)
};

CandidateLocation locate_test_sample(std::size_t index, const DatasetConfig& config);

/// Stacks [1, D, H, W] volumes into a [n, 1, D, H, W] batch.
Tensor stack_batch(const std::vector<const PatchSample*>& samples);

}  // namespace octoconv
