// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "octoconv/model.hpp"

namespace octoconv {

// Layout: a text manifest terminated by a line reading `end`, then the raw
// little-endian float32 buffers of every listed tensor in manifest order.
//
//   octoconv-checkpoint 1
//   group <name>
//   config <key> = <value>         (ModelConfig fields)
//   layer <name> <description>
//   tensor <name> <dim> <dim> ...
//   end

void save_checkpoint(std::ostream& out, Model& model);
void save_checkpoint(const std::filesystem::path& path, Model& model);

/// Rebuilds the model from the manifest and loads every tensor. Throws
/// ParseError on malformed manifests, truncated data or shape mismatches.
Model load_checkpoint(std::istream& in, const std::string& source = "<stream>");
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace octoconv
