// SPDX-License-Identifier: Apache-2.0
#include "octoconv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace octoconv {

namespace {

enum SplitStream : std::uint64_t { kTrainStream = 1, kValStream = 2, kTestStream = 3, kUnnestedBase = 16 };

struct Grid {
  std::size_t D, H, W;
  std::array<double, 3> spacing;  // (z, y, x)
  std::size_t size() const { return D * H * W; }
  // Offset of voxel index from the patch center, mm.
  double z_mm(std::size_t z) const { return (static_cast<double>(z) - 0.5 * (D - 1)) * spacing[0]; }
  double y_mm(std::size_t y) const { return (static_cast<double>(y) - 0.5 * (H - 1)) * spacing[1]; }
  double x_mm(std::size_t x) const { return (static_cast<double>(x) - 0.5 * (W - 1)) * spacing[2]; }
};

// Spatially correlated gaussian texture with unit variance.
std::vector<double> correlated_noise(Rng& rng, const Grid& g) {
  std::vector<double> a(g.size());
  for (double& v : a) v = rng.normal();
  std::vector<double> b(g.size());
  auto blur = [&](std::size_t stride, std::size_t extent, const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t i = 0; i < src.size(); ++i) {
      const std::size_t pos = (i / stride) % extent;
      double s = src[i], n = 1.0;
      if (pos > 0) s += src[i - stride], n += 1.0;
      if (pos + 1 < extent) s += src[i + stride], n += 1.0;
      dst[i] = s / std::sqrt(n);
    }
  };
  blur(1, g.W, a, b);
  blur(g.W, g.H, b, a);
  blur(g.W * g.H, g.D, a, b);
  // Each pass above keeps unit variance for i.i.d. input; the sums are
  // correlated afterwards, so renormalize empirically.
  double mean = 0.0, sq = 0.0;
  for (double v : b) mean += v;
  mean /= static_cast<double>(b.size());
  for (double v : b) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(b.size()));
  for (double& v : b) v = sd > 0 ? (v - mean) / sd : 0.0;
  return b;
}

void add_blob(std::vector<double>& hu, const Grid& g, const std::array<double, 3>& center,
              const std::array<double, 3>& sigma, double amplitude) {
  std::size_t i = 0;
  for (std::size_t z = 0; z < g.D; ++z)
    for (std::size_t y = 0; y < g.H; ++y)
      for (std::size_t x = 0; x < g.W; ++x, ++i) {
        const double dz = (g.z_mm(z) - center[0]) / sigma[0];
        const double dy = (g.y_mm(y) - center[1]) / sigma[1];
        const double dx = (g.x_mm(x) - center[2]) / sigma[2];
        hu[i] += amplitude * std::exp(-0.5 * (dz * dz + dy * dy + dx * dx));
      }
}

void add_tube(std::vector<double>& hu, const Grid& g, const std::array<double, 3>& point,
              const std::array<double, 3>& dir, double sigma, double amplitude) {
  std::size_t i = 0;
  for (std::size_t z = 0; z < g.D; ++z)
    for (std::size_t y = 0; y < g.H; ++y)
      for (std::size_t x = 0; x < g.W; ++x, ++i) {
        const double r[3] = {g.z_mm(z) - point[0], g.y_mm(y) - point[1], g.x_mm(x) - point[2]};
        const double along = r[0] * dir[0] + r[1] * dir[1] + r[2] * dir[2];
        const double d2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2] - along * along;
        hu[i] += amplitude * std::exp(-0.5 * std::max(d2, 0.0) / (sigma * sigma));
      }
}

std::array<double, 3> random_direction(Rng& rng) {
  const double cos_t = rng.uniform(-1.0, 1.0);
  const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  return {cos_t, sin_t * std::sin(phi), sin_t * std::cos(phi)};
}

constexpr double kFwhmToSigma = 1.0 / 2.354820045;

float sample_trilinear(const float* chan, std::size_t D, std::size_t H, std::size_t W, double z, double y,
                       double x, float fill) {
  const double fz = std::floor(z), fy = std::floor(y), fx = std::floor(x);
  const long z0 = static_cast<long>(fz), y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
  const double tz = z - fz, ty = y - fy, tx = x - fx;
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dz ? tz : 1 - tz) * (dy ? ty : 1 - ty) * (dx ? tx : 1 - tx);
        if (w == 0.0) continue;
        const long zz = z0 + dz, yy = y0 + dy, xx = x0 + dx;
        const bool inside = zz >= 0 && zz < static_cast<long>(D) && yy >= 0 && yy < static_cast<long>(H) &&
                            xx >= 0 && xx < static_cast<long>(W);
        acc += w * (inside ? chan[(zz * H + yy) * W + xx] : fill);
      }
  return static_cast<float>(acc);
}

void require_volume(const Tensor& v, const char* what) { require_rank(v, 4, what); }

}  // namespace

std::string_view to_string(PatchKind kind) {
  switch (kind) {
    case PatchKind::kNodule: return "nodule";
    case PatchKind::kVessel: return "vessel";
    case PatchKind::kBorderBlob: return "border_blob";
    case PatchKind::kNoise: return "noise";
  }
  return "unknown";
}

GeneratorDomain GeneratorDomain::training() { return {}; }

GeneratorDomain GeneratorDomain::evaluation(double shift) {
  GeneratorDomain d;
  d.nodule_diameter_min_mm -= 1.5 * shift;
  d.nodule_diameter_max_mm -= 1.0 * shift;
  d.malignant_diameter_min_mm -= 0.5 * shift;
  d.peak_hu_min -= 150.0 * shift;
  d.peak_hu_max -= 50.0 * shift;
  d.background_sigma_hu += 20.0 * shift;
  d.noise_texture_sigma_hu += 20.0 * shift;
  return d;
}

DatasetConfig DatasetConfig::desk() { return {}; }

DatasetConfig DatasetConfig::paper_shape() {
  DatasetConfig c;
  c.patch_shape = {12, 72, 72};
  c.train_sizes = {30, 300, 3000, 30000};
  c.val_size = 8889;
  c.test_size = 8582;
  c.test_scans = 888;
  return c;
}

float normalize_hu(double hu) {
  const double v = 2.0 * (hu + 1000.0) / 1300.0 - 1.0;
  return static_cast<float>(std::clamp(v, -1.0, 1.0));
}

PatchSample generate_patch(Rng& rng, int label, const DatasetConfig& config, const GeneratorDomain& domain,
                           bool malignant) {
  const Grid g{config.patch_shape[0], config.patch_shape[1], config.patch_shape[2], config.spacing_mm};
  PatchSample s;
  s.label = label;
  s.malignant = label == 1 && malignant;

  const double half_z = 0.5 * g.D * g.spacing[0], half_y = 0.5 * g.H * g.spacing[1],
               half_x = 0.5 * g.W * g.spacing[2];
  double bg_sigma = domain.background_sigma_hu;

  PatchKind kind = PatchKind::kNodule;
  if (label == 0) {
    const double u = rng.uniform();
    kind = u < 0.6 ? PatchKind::kVessel : (u < 0.8 ? PatchKind::kBorderBlob : PatchKind::kNoise);
  }
  s.meta.kind = kind;
  if (kind == PatchKind::kNoise) bg_sigma = domain.noise_texture_sigma_hu;

  std::vector<double> hu = correlated_noise(rng, g);
  for (double& v : hu) v = domain.background_hu + bg_sigma * v;

  const double peak = rng.uniform(domain.peak_hu_min, domain.peak_hu_max);
  const double amplitude = peak - domain.background_hu;
  switch (kind) {
    case PatchKind::kNodule: {
      const double dmin = s.malignant ? domain.malignant_diameter_min_mm : domain.nodule_diameter_min_mm;
      const double d = rng.uniform(dmin, domain.nodule_diameter_max_mm);
      const std::array<double, 3> offset{rng.uniform(-0.4, 0.4) * g.spacing[0], rng.uniform(-1.5, 1.5),
                                         rng.uniform(-1.5, 1.5)};
      std::array<double, 3> sigma{};
      for (double& sg : sigma) sg = d * kFwhmToSigma * rng.uniform(0.8, 1.25);
      add_blob(hu, g, offset, sigma, amplitude);
      s.meta.diameter_mm = d;
      s.meta.offset_mm = offset;
      break;
    }
    case PatchKind::kVessel: {
      // Nodule-like calibre through the centre: only the elongation tells it apart.
      const double radius = 0.35 * rng.uniform(domain.nodule_diameter_min_mm, domain.nodule_diameter_max_mm);
      const std::array<double, 3> point{rng.uniform(-0.4, 0.4) * g.spacing[0], rng.uniform(-1.5, 1.5),
                                        rng.uniform(-1.5, 1.5)};
      add_tube(hu, g, point, random_direction(rng), 2.0 * radius * kFwhmToSigma, amplitude);
      s.meta.diameter_mm = 2.0 * radius;
      s.meta.offset_mm = point;
      break;
    }
    case PatchKind::kBorderBlob: {
      const double d = rng.uniform(domain.nodule_diameter_min_mm, domain.nodule_diameter_max_mm);
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const std::array<double, 3> offset{rng.uniform(-half_z, half_z), half_y * std::sin(phi),
                                         half_x * std::cos(phi)};
      std::array<double, 3> sigma{};
      for (double& sg : sigma) sg = d * kFwhmToSigma * rng.uniform(0.8, 1.25);
      add_blob(hu, g, offset, sigma, amplitude);
      s.meta.diameter_mm = d;
      s.meta.offset_mm = offset;
      break;
    }
    case PatchKind::kNoise:
      break;
  }

  s.volume = Tensor({1, g.D, g.H, g.W});
  for (std::size_t i = 0; i < hu.size(); ++i) s.volume[i] = normalize_hu(hu[i]);
  return s;
}

AugmentPolicy AugmentPolicy::none() {
  AugmentPolicy p;
  p.rotate = p.reflect = p.translate = p.scale = p.noise = p.remap = false;
  return p;
}

Tensor rotate_scale_z(const Tensor& volume, double angle_rad, double scale, float fill) {
  require_volume(volume, "rotate_scale_z");
  if (!(scale > 0.0)) throw std::invalid_argument("rotate_scale_z: scale must be positive");
  const std::size_t C = volume.dim(0), D = volume.dim(1), H = volume.dim(2), W = volume.dim(3);
  const double cz = 0.5 * (D - 1), cy = 0.5 * (H - 1), cx = 0.5 * (W - 1);
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  Tensor out(volume.shape());
  for (std::size_t ch = 0; ch < C; ++ch) {
    const float* src = volume.ptr() + ch * D * H * W;
    float* dst = out.ptr() + ch * D * H * W;
    for (std::size_t z = 0; z < D; ++z)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double px = (x - cx), py = (y - cy), pz = (z - cz);
          // Inverse rotation then inverse scale.
          const double sx = (c * px + s * py) / scale + cx;
          const double sy = (-s * px + c * py) / scale + cy;
          const double sz = pz / scale + cz;
          dst[(z * H + y) * W + x] = sample_trilinear(src, D, H, W, sz, sy, sx, fill);
        }
  }
  return out;
}

Tensor translate(const Tensor& volume, std::array<int, 3> shift, float fill) {
  require_volume(volume, "translate");
  const long C = volume.dim(0), D = volume.dim(1), H = volume.dim(2), W = volume.dim(3);
  Tensor out(volume.shape(), fill);
  for (long ch = 0; ch < C; ++ch)
    for (long z = 0; z < D; ++z)
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
          const long sz = z - shift[0], sy = y - shift[1], sx = x - shift[2];
          if (sz < 0 || sz >= D || sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
          out[((ch * D + z) * H + y) * W + x] = volume[((ch * D + sz) * H + sy) * W + sx];
        }
  return out;
}

Tensor reflect(const Tensor& volume, int axis) {
  require_volume(volume, "reflect");
  if (axis < 0 || axis > 2) throw std::invalid_argument("reflect: axis must be 0, 1 or 2");
  const std::size_t C = volume.dim(0), D = volume.dim(1), H = volume.dim(2), W = volume.dim(3);
  Tensor out(volume.shape());
  for (std::size_t ch = 0; ch < C; ++ch)
    for (std::size_t z = 0; z < D; ++z)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t sz = axis == 0 ? D - 1 - z : z;
          const std::size_t sy = axis == 1 ? H - 1 - y : y;
          const std::size_t sx = axis == 2 ? W - 1 - x : x;
          out[((ch * D + z) * H + y) * W + x] = volume[((ch * D + sz) * H + sy) * W + sx];
        }
  return out;
}

PatchSample augment(const PatchSample& sample, Rng& rng, const AugmentPolicy& policy) {
  PatchSample out = sample;
  Tensor& v = out.volume;
  if (policy.reflect)
    for (int axis = 0; axis < 3; ++axis)
      if (rng.bernoulli(0.5)) v = reflect(v, axis);
  const double angle = policy.rotate ? rng.uniform(0.0, 2.0 * M_PI) : 0.0;
  const double factor = policy.scale ? rng.uniform(policy.scale_min, policy.scale_max) : 1.0;
  if (policy.rotate || policy.scale) v = rotate_scale_z(v, angle, factor, -1.0f);
  if (policy.translate) {
    std::array<int, 3> shift{};
    for (int& s : shift) s = static_cast<int>(rng.integer(-policy.max_translation, policy.max_translation));
    v = translate(v, shift, -1.0f);
  }
  if (policy.noise)
    for (float& x : v.data()) x += static_cast<float>(policy.noise_sigma * rng.normal());
  if (policy.remap) {
    const double gamma = rng.uniform(policy.gamma_min, policy.gamma_max);
    for (float& x : v.data())
      x = static_cast<float>(std::copysign(std::pow(std::abs(static_cast<double>(x)), gamma), x));
  }
  for (float& x : v.data()) x = std::clamp(x, -1.0f, 1.0f);
  return out;
}

std::size_t positive_count(std::size_t size, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(size) * fraction + 1e-9));
}

namespace {

// Spreads positives evenly so every prefix of length n holds
// floor(n * fraction) of them.
int label_for_index(std::size_t i, double fraction) {
  return positive_count(i + 1, fraction) > positive_count(i, fraction) ? 1 : 0;
}

std::vector<PatchSample> generate_split(std::uint64_t master_seed, std::uint64_t stream, std::size_t size,
                                        double positive_fraction, const DatasetConfig& config,
                                        const GeneratorDomain& domain) {
  std::vector<PatchSample> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, stream, i);
    Rng rng(seed);
    const int label = label_for_index(i, positive_fraction);
    const bool malignant = label == 1 && rng.bernoulli(config.malignancy_fraction);
    PatchSample s = generate_patch(rng, label, config, domain, malignant);
    s.meta.seed = seed;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Datasets build_datasets(std::uint64_t master_seed, const DatasetConfig& config) {
  Datasets ds;
  const auto train_domain = GeneratorDomain::training();
  const auto eval_domain = GeneratorDomain::evaluation(config.domain_shift);
  if (!config.train_sizes.empty()) {
    if (config.nested) {
      const std::size_t largest = *std::max_element(config.train_sizes.begin(), config.train_sizes.end());
      auto all = generate_split(master_seed, kTrainStream, largest, config.train_positive_fraction, config,
                                train_domain);
      for (std::size_t n : config.train_sizes)
        ds.train[n] = std::vector<PatchSample>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
      for (std::size_t k = 0; k < config.train_sizes.size(); ++k)
        ds.train[config.train_sizes[k]] = generate_split(master_seed, kUnnestedBase + k, config.train_sizes[k],
                                                         config.train_positive_fraction, config, train_domain);
    }
  }
  ds.val = generate_split(master_seed, kValStream, config.val_size, config.val_positive_fraction, config,
                          eval_domain);
  ds.test = generate_split(master_seed, kTestStream, config.test_size, config.test_positive_fraction, config,
                           eval_domain);
  return ds;
}

CandidateLocation locate_test_sample(std::size_t index, const DatasetConfig& config) {
  const std::size_t scans = std::max<std::size_t>(config.test_scans, 1);
  const std::size_t scan = index % scans, slot = index / scans;
  char name[32];
  std::snprintf(name, sizeof(name), "scan%04zu", scan);
  // 60 mm spacing keeps every candidate far outside its neighbours' nodules.
  return {name,
          {40.0 + 60.0 * static_cast<double>(slot % 4), 40.0 + 60.0 * static_cast<double>((slot / 4) % 4),
           30.0 + 60.0 * static_cast<double>(slot / 16)}};
}

Tensor stack_batch(const std::vector<const PatchSample*>& samples) {
  if (samples.empty()) throw ShapeError("stack_batch: empty batch");
  const Shape& s = samples.front()->volume.shape();
  require_rank(samples.front()->volume, 4, "stack_batch sample");
  Tensor batch({samples.size(), s[0], s[1], s[2], s[3]});
  const std::size_t len = samples.front()->volume.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->volume.shape() != s) throw ShapeError("stack_batch: mixed sample shapes");
    std::copy(samples[i]->volume.ptr(), samples[i]->volume.ptr() + len, batch.ptr() + i * len);
  }
  return batch;
}

}  // namespace octoconv
