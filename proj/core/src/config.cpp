// SPDX-License-Identifier: Apache-2.0
#include "octoconv/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "octoconv/error.hpp"

namespace octoconv {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("expected an unsigned integer, got '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size(item));
  return out;
}

template <std::size_t N>
std::array<std::size_t, N> to_fixed(const std::string& s) {
  const auto v = to_sizes(s);
  if (v.size() != N) throw std::invalid_argument("expected " + std::to_string(N) + " comma-separated integers");
  std::array<std::size_t, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

using Setter = std::function<void(const std::string&)>;

std::map<std::string, Setter> model_setters(ModelConfig& m) {
  return {
      {"group_name", [&m](const std::string& v) { m.group_name = parse_group_name(v); }},
      {"base_widths", [&m](const std::string& v) { m.base_widths = to_sizes(v); }},
      {"kernel", [&m](const std::string& v) { m.kernel = to_fixed<3>(v); }},
      {"pool_after", [&m](const std::string& v) { m.pool_after = v.empty() ? std::vector<std::size_t>{} : to_sizes(v); }},
      {"dropout_after",
       [&m](const std::string& v) { m.dropout_after = v.empty() ? std::vector<std::size_t>{} : to_sizes(v); }},
      {"dropout_p", [&m](const std::string& v) { m.dropout_p = static_cast<float>(to_double(v)); }},
      {"input_shape", [&m](const std::string& v) { m.input_shape = to_fixed<4>(v); }},
      {"n_classes", [&m](const std::string& v) { m.n_classes = to_size(v); }},
      {"scale_widths", [&m](const std::string& v) { m.scale_widths = to_bool(v); }},
  };
}

std::map<std::string, Setter> train_setters(TrainConfig& t) {
  return {
      {"batch_size", [&t](const std::string& v) { t.batch_size = to_size(v); }},
      {"alpha", [&t](const std::string& v) { t.alpha = to_double(v); }},
      {"beta1", [&t](const std::string& v) { t.beta1 = to_double(v); }},
      {"beta2", [&t](const std::string& v) { t.beta2 = to_double(v); }},
      {"epsilon", [&t](const std::string& v) { t.epsilon = to_double(v); }},
      {"max_epochs", [&t](const std::string& v) { t.max_epochs = to_size(v); }},
      {"patience", [&t](const std::string& v) { t.patience = to_size(v); }},
      {"seed", [&t](const std::string& v) { t.seed = to_u64(v); }},
      {"augment", [&t](const std::string& v) { t.augment = to_bool(v); }},
  };
}

void apply(std::string_view text, const std::string& source, const std::map<std::string, Setter>& setters) {
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string line = trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ParseError(source, line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ParseError(source, line_no, "repeated key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, key + ": " + e.what());
    }
  }
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <std::size_t N>
std::string join(const std::array<std::size_t, N>& a) {
  return join(std::vector<std::size_t>(a.begin(), a.end()));
}

template <typename T>
std::string num(T v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void apply_config_text(std::string_view text, const std::string& source, ModelConfig& model, TrainConfig& train) {
  auto setters = model_setters(model);
  setters.merge(train_setters(train));
  apply(text, source, setters);
}

void apply_config_file(const std::filesystem::path& path, ModelConfig& model, TrainConfig& train) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_text(text.str(), path.string(), model, train);
}

void apply_model_config_text(std::string_view text, const std::string& source, ModelConfig& model) {
  apply(text, source, model_setters(model));
}

void write_model_config(std::ostream& out, const ModelConfig& m) {
  out << "group_name = " << to_string(m.group_name) << '\n'
      << "base_widths = " << join(m.base_widths) << '\n'
      << "kernel = " << join(m.kernel) << '\n'
      << "pool_after = " << join(m.pool_after) << '\n'
      << "dropout_after = " << join(m.dropout_after) << '\n'
      << "dropout_p = " << num(m.dropout_p) << '\n'
      << "input_shape = " << join(m.input_shape) << '\n'
      << "n_classes = " << m.n_classes << '\n'
      << "scale_widths = " << (m.scale_widths ? "true" : "false") << '\n';
}

void write_train_config(std::ostream& out, const TrainConfig& t) {
  out << "batch_size = " << t.batch_size << '\n'
      << "alpha = " << num(t.alpha) << '\n'
      << "beta1 = " << num(t.beta1) << '\n'
      << "beta2 = " << num(t.beta2) << '\n'
      << "epsilon = " << num(t.epsilon) << '\n'
      << "max_epochs = " << t.max_epochs << '\n'
      << "patience = " << t.patience << '\n'
      << "seed = " << t.seed << '\n'
      << "augment = " << (t.augment ? "true" : "false") << '\n';
}

}  // namespace octoconv
