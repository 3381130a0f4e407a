// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "octoconv/synth.hpp"

namespace octoconv {

// A split directory holds index.csv
//   sample_id,label,malignant,diameter_mm,kind,file
// and one volume per sample (see volume_io), stored as [1, 1, D, H, W].

void write_split(const std::filesystem::path& dir, const std::vector<PatchSample>& samples,
                 const std::array<double, 3>& spacing_mm);
std::vector<PatchSample> read_split(const std::filesystem::path& dir);

/// `key = value` lines with DatasetConfig field names.
void write_dataset_config(std::ostream& out, const DatasetConfig& config);
DatasetConfig read_dataset_config(const std::filesystem::path& path);

PatchKind parse_patch_kind(std::string_view text);

}  // namespace octoconv
