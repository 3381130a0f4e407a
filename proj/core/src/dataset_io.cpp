// SPDX-License-Identifier: Apache-2.0
#include "octoconv/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "octoconv/error.hpp"
#include "octoconv/volume_io.hpp"

namespace octoconv {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
std::string num(T v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("invalid number '" + s + "'");
  return v;
}

template <typename T, std::size_t N>
std::array<T, N> parse_array(const std::string& s) {
  const auto items = split(s, ',');
  if (items.size() != N) throw std::invalid_argument("expected " + std::to_string(N) + " values");
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse<T>(trim(items[i]));
  return out;
}

template <typename Range>
std::string join(const Range& r) {
  std::string s;
  for (const auto& v : r) s += (s.empty() ? "" : ",") + num(v);
  return s;
}

}  // namespace

PatchKind parse_patch_kind(std::string_view text) {
  for (PatchKind k : {PatchKind::kNodule, PatchKind::kVessel, PatchKind::kBorderBlob, PatchKind::kNoise})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown patch kind '" + std::string(text) + "'");
}

void write_split(const std::filesystem::path& dir, const std::vector<PatchSample>& samples,
                 const std::array<double, 3>& spacing_mm) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.csv");
  if (!index) throw std::runtime_error("cannot write " + (dir / "index.csv").string());
  index << "sample_id,label,malignant,diameter_mm,kind,file\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    char name[32];
    std::snprintf(name, sizeof(name), "s%06zu.raw", i);
    Volume v{s.volume.reshaped({1, s.volume.dim(0), s.volume.dim(1), s.volume.dim(2), s.volume.dim(3)}), spacing_mm};
    write_volume(dir / name, v);
    char diam[32];
    std::snprintf(diam, sizeof(diam), "%.6f", s.meta.diameter_mm);
    index << i << ',' << s.label << ',' << (s.malignant ? 1 : 0) << ',' << diam << ',' << to_string(s.meta.kind) << ','
          << name << '\n';
  }
}

std::vector<PatchSample> read_split(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.csv";
  const std::string file = index_path.string();
  std::ifstream in(index_path);
  if (!in) throw ParseError(file, 0, "cannot open split index");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "sample_id,label,malignant,diameter_mm,kind,file")
    throw ParseError(file, 1, "unexpected index header");
  std::vector<PatchSample> out;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw ParseError(file, line_no, "expected 6 fields");
    PatchSample s;
    try {
      if (parse<std::size_t>(f[0]) != out.size()) throw std::invalid_argument("sample ids must count up from 0");
      s.label = parse<int>(f[1]);
      if (s.label != 0 && s.label != 1) throw std::invalid_argument("label must be 0 or 1");
      s.malignant = parse<int>(f[2]) == 1;
      s.meta.diameter_mm = std::stod(f[3]);
      s.meta.kind = parse_patch_kind(f[4]);
    } catch (const std::exception& e) {
      throw ParseError(file, line_no, e.what());
    }
    Volume v = read_volume(dir / f[5]);
    s.volume = v.data.reshaped({v.data.dim(1), v.data.dim(2), v.data.dim(3), v.data.dim(4)});
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset_config(std::ostream& out, const DatasetConfig& c) {
  out << "patch_shape = " << join(c.patch_shape) << '\n'
      << "spacing_mm = " << join(c.spacing_mm) << '\n'
      << "train_sizes = " << join(c.train_sizes) << '\n'
      << "train_positive_fraction = " << num(c.train_positive_fraction) << '\n'
      << "val_size = " << c.val_size << '\n'
      << "val_positive_fraction = " << num(c.val_positive_fraction) << '\n'
      << "test_size = " << c.test_size << '\n'
      << "test_positive_fraction = " << num(c.test_positive_fraction) << '\n'
      << "nested = " << (c.nested ? "true" : "false") << '\n'
      << "malignancy_fraction = " << num(c.malignancy_fraction) << '\n'
      << "domain_shift = " << num(c.domain_shift) << '\n'
      << "test_scans = " << c.test_scans << '\n';
}

DatasetConfig read_dataset_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open dataset config");
  DatasetConfig c;
  const std::map<std::string, std::function<void(const std::string&)>> setters{
      {"patch_shape", [&](const std::string& v) { c.patch_shape = parse_array<std::size_t, 3>(v); }},
      {"spacing_mm", [&](const std::string& v) { c.spacing_mm = parse_array<double, 3>(v); }},
      {"train_sizes",
       [&](const std::string& v) {
         c.train_sizes.clear();
         for (const auto& item : split(v, ',')) c.train_sizes.push_back(parse<std::size_t>(trim(item)));
       }},
      {"train_positive_fraction", [&](const std::string& v) { c.train_positive_fraction = parse<double>(v); }},
      {"val_size", [&](const std::string& v) { c.val_size = parse<std::size_t>(v); }},
      {"val_positive_fraction", [&](const std::string& v) { c.val_positive_fraction = parse<double>(v); }},
      {"test_size", [&](const std::string& v) { c.test_size = parse<std::size_t>(v); }},
      {"test_positive_fraction", [&](const std::string& v) { c.test_positive_fraction = parse<double>(v); }},
      {"nested", [&](const std::string& v) { c.nested = v == "true"; }},
      {"malignancy_fraction", [&](const std::string& v) { c.malignancy_fraction = parse<double>(v); }},
      {"domain_shift", [&](const std::string& v) { c.domain_shift = parse<double>(v); }},
      {"test_scans", [&](const std::string& v) { c.test_scans = parse<std::size_t>(v); }},
  };
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ParseError(path.string(), line_no, "unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line_no, key + ": " + e.what());
    }
  }
  return c;
}

}  // namespace octoconv
