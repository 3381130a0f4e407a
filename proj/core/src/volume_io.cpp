// SPDX-License-Identifier: Apache-2.0
#include "octoconv/volume_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace octoconv {

namespace {

std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  if (p.extension() == ".raw" || p.extension() == ".meta") p.replace_extension();
  p += ext;
  return p;
}

}  // namespace

void write_f32_le(std::ostream& out, std::span<const float> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_f32_le(std::istream& in, std::span<float> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw std::runtime_error("truncated float32 buffer");
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
}

void write_volume(const std::filesystem::path& path, const Volume& volume) {
  require_rank(volume.data, 5, "write_volume");
  {
    std::ofstream meta(with_ext(path, ".meta"));
    if (!meta) throw std::runtime_error("cannot open " + with_ext(path, ".meta").string());
    meta << "shape:";
    for (std::size_t d : volume.data.shape()) meta << ' ' << d;
    meta << "\nspacing_mm: " << volume.spacing_mm[0] << ' ' << volume.spacing_mm[1] << ' '
         << volume.spacing_mm[2] << '\n';
  }
  std::ofstream raw(with_ext(path, ".raw"), std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open " + with_ext(path, ".raw").string());
  write_f32_le(raw, volume.data.data());
}

Volume read_volume(const std::filesystem::path& path) {
  const auto meta_path = with_ext(path, ".meta");
  std::ifstream meta(meta_path);
  if (!meta) throw std::runtime_error("cannot open " + meta_path.string());
  Shape shape;
  Volume vol;
  bool have_shape = false, have_spacing = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "shape:") {
      std::size_t d;
      while (is >> d) shape.push_back(d);
      if (shape.size() != 5) throw ParseError(meta_path.string(), line_no, "shape needs 5 dims");
      have_shape = true;
    } else if (key == "spacing_mm:") {
      if (!(is >> vol.spacing_mm[0] >> vol.spacing_mm[1] >> vol.spacing_mm[2]))
        throw ParseError(meta_path.string(), line_no, "spacing_mm needs 3 values");
      have_spacing = true;
    } else {
      throw ParseError(meta_path.string(), line_no, "unknown key '" + key + "'");
    }
  }
  if (!have_shape || !have_spacing)
    throw ParseError(meta_path.string(), line_no, "missing shape or spacing_mm");

  vol.data = Tensor(shape);
  std::ifstream raw(with_ext(path, ".raw"), std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open " + with_ext(path, ".raw").string());
  read_f32_le(raw, vol.data.data());
  return vol;
}

}  // namespace octoconv
