// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>

#include "octoconv/tensor.hpp"

namespace octoconv {

/// On-disk volume: `<base>.raw` holds little-endian float32 values in
/// row-major order; `<base>.meta` is a text sidecar with the lines
///   shape: n c d h w
///   spacing_mm: z y x
struct Volume {
  Tensor data;  // rank 5
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
};

/// `path` may name the .raw file or the shared basename.
void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);

/// Raw little-endian float32 helpers shared with the checkpoint format.
void write_f32_le(std::ostream& out, std::span<const float> values);
void read_f32_le(std::istream& in, std::span<float> values);

}  // namespace octoconv
