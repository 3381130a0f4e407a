// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "octoconv/model.hpp"
#include "octoconv/train.hpp"

namespace octoconv {

// Config files hold one `key = value` pair per line; `#` starts a comment.
// Keys are the ModelConfig and TrainConfig field names. Lists are
// comma-separated, booleans are true/false. Unknown or repeated keys and bad
// values raise ParseError with the line number.

void apply_config_text(std::string_view text, const std::string& source, ModelConfig& model, TrainConfig& train);
void apply_config_file(const std::filesystem::path& path, ModelConfig& model, TrainConfig& train);

/// Only ModelConfig keys are accepted.
void apply_model_config_text(std::string_view text, const std::string& source, ModelConfig& model);

void write_model_config(std::ostream& out, const ModelConfig& model);
void write_train_config(std::ostream& out, const TrainConfig& train);

}  // namespace octoconv
