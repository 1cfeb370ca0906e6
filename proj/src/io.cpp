#include "acwe/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace acwe {

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

[[noreturn]] void io_fail(const std::string& what, const std::filesystem::path& path) {
  throw std::runtime_error(what + ": " + path.string());
}

}  // namespace

void write_grid_f32(const std::filesystem::path& path, const Grid<double>& grid) {
  std::vector<float> buf(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) buf[i] = static_cast<float>(grid[i]);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) io_fail("cannot open for writing", path);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) io_fail("write failed", path);

  nlohmann::ordered_json meta;
  meta["height"] = grid.height();
  meta["width"] = grid.width();
  meta["dtype"] = "f32le";
  std::ofstream m(sidecar_path(path), std::ios::trunc);
  if (!m) io_fail("cannot open for writing", sidecar_path(path));
  m << meta.dump(2) << "\n";
  if (!m) io_fail("write failed", sidecar_path(path));
}

Grid<double> read_grid_f32(const std::filesystem::path& path) {
  std::ifstream m(sidecar_path(path));
  if (!m) io_fail("missing sidecar", sidecar_path(path));
  nlohmann::json meta;
  try {
    m >> meta;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("bad sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  if (!meta.contains("height") || !meta.contains("width"))
    io_fail("sidecar lacks height/width", sidecar_path(path));
  if (meta.value("dtype", "") != "f32le")
    io_fail("sidecar dtype is not f32le", sidecar_path(path));
  const int h = meta["height"].get<int>();
  const int w = meta["width"].get<int>();

  std::ifstream f(path, std::ios::binary);
  if (!f) io_fail("cannot open", path);
  std::vector<float> buf(static_cast<std::size_t>(h) * w);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
    io_fail("file shorter than sidecar shape declares", path);

  Grid<double> grid(h, w);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = buf[i];
  return grid;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  write_grid_f32(path, image.data);
}

Image read_image(const std::filesystem::path& path) {
  return Image(read_grid_f32(path));
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  Grid<double> grid(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) grid[i] = mask[i] ? 1.0 : 0.0;
  write_grid_f32(path, grid);
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const Grid<double> grid = read_grid_f32(path);
  BinaryMask mask(grid.height(), grid.width());
  for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = grid[i] > 0.5 ? 1 : 0;
  return mask;
}

void write_mask_pgm(std::ostream& out, const BinaryMask& mask) {
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  std::vector<std::uint8_t> row(mask.width());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) row[x] = mask(y, x) ? 255 : 0;
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) io_fail("cannot open for writing", path);
  write_mask_pgm(f, mask);
  if (!f) io_fail("write failed", path);
}

namespace {

// Skips PGM whitespace and '#' comment lines.
int next_pgm_token(std::istream& in) {
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = in.get();
    c = in.get();
  }
  in.unget();
  int value = 0;
  in >> value;
  return value;
}

}  // namespace

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) io_fail("cannot open", path);
  char magic[2] = {0, 0};
  f.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') io_fail("not a P5 PGM", path);
  const int w = next_pgm_token(f);
  const int h = next_pgm_token(f);
  const int maxval = next_pgm_token(f);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) io_fail("bad PGM header", path);
  f.get();  // single whitespace after maxval

  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    io_fail("PGM payload truncated", path);

  BinaryMask mask(h, w);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = buf[i] > maxval / 2 ? 1 : 0;
  return mask;
}

void write_gray_pgm(const std::filesystem::path& path, const Grid<double>& grid) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) io_fail("cannot open for writing", path);
  f << "P5\n" << grid.width() << " " << grid.height() << "\n255\n";
  std::vector<std::uint8_t> row(grid.width());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double v = std::clamp(grid(y, x), 0.0, 1.0);
      row[x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) io_fail("write failed", path);
}

}  // namespace acwe
