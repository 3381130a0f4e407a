// SPDX-License-Identifier: Apache-2.0
#include "octoconv/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "octoconv/config.hpp"
#include "octoconv/error.hpp"
#include "octoconv/volume_io.hpp"

namespace octoconv {
namespace {

constexpr const char* kMagic = "octoconv-checkpoint 1";

std::vector<std::pair<std::string, Tensor*>> all_tensors(Model& model) {
  std::vector<std::pair<std::string, Tensor*>> t;
  for (auto& p : model.parameters()) t.emplace_back(p.name, p.value);
  for (auto& b : model.buffers()) t.push_back(b);
  return t;
}

}  // namespace

void save_checkpoint(std::ostream& out, Model& model) {
  out << kMagic << '\n' << "group " << to_string(model.config().group_name) << '\n';
  std::ostringstream cfg;
  write_model_config(cfg, model.config());
  std::istringstream lines(cfg.str());
  for (std::string line; std::getline(lines, line);) out << "config " << line << '\n';
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    const auto& c = model.convs[i];
    out << "layer conv" << i + 1 << " gconv " << (c.first_layer() ? "first" : "higher") << " n_in=" << c.n_in()
        << " n_out=" << c.n_out() << " order=" << c.group_order() << '\n';
    out << "layer bn" << i + 1 << " batchnorm features=" << model.norms[i].features() << '\n';
  }
  out << "layer head dense in=" << model.head.weight.dim(1) << " out=" << model.head.weight.dim(0) << '\n';
  const auto tensors = all_tensors(model);
  for (const auto& [name, t] : tensors) {
    out << "tensor " << name;
    for (std::size_t d : t->shape()) out << ' ' << d;
    out << '\n';
  }
  out << "end\n";
  for (const auto& [name, t] : tensors) write_f32_le(out, t->data());
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_checkpoint(out, model);
}

Model load_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kMagic) throw ParseError(source, 1, "not an octoconv checkpoint");

  std::string config_text;
  std::vector<std::pair<std::string, Shape>> listed;
  bool ended = false;
  while (!ended && std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "end") {
      ended = true;
    } else if (kind == "config") {
      config_text += line.substr(7) + '\n';
    } else if (kind == "tensor") {
      std::string name;
      Shape shape;
      ls >> name;
      for (std::size_t d; ls >> d;) shape.push_back(d);
      if (name.empty() || shape.empty()) throw ParseError(source, line_no, "malformed tensor line");
      listed.emplace_back(name, shape);
    } else if (kind != "group" && kind != "layer") {
      throw ParseError(source, line_no, "unexpected manifest entry '" + kind + "'");
    }
  }
  if (!ended) throw ParseError(source, line_no, "manifest is missing its 'end' line");

  ModelConfig config;
  apply_model_config_text(config_text, source + " (config)", config);
  Model model(config);
  const auto tensors = all_tensors(model);
  if (tensors.size() != listed.size())
    throw ParseError(source, line_no,
                     "manifest lists " + std::to_string(listed.size()) + " tensors, model has " +
                         std::to_string(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].first != listed[i].first || tensors[i].second->shape() != listed[i].second)
      throw ParseError(source, line_no, "tensor '" + listed[i].first + "' does not match the model layout");
  }
  for (const auto& [name, t] : tensors) {
    try {
      read_f32_le(in, t->data());
    } catch (const std::runtime_error&) {
      throw ParseError(source, line_no, "truncated data for tensor '" + name + "'");
    }
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open checkpoint");
  return load_checkpoint(in, path.string());
}

}  // namespace octoconv
