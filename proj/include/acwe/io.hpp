#pragma once

#include <filesystem>
#include <iosfwd>

#include "acwe/types.hpp"

namespace acwe {

/// Grids travel as raw little-endian 32-bit floats, row-major, with a JSON
/// sidecar ("<path>.json") declaring {"height","width","dtype":"f32le"}.
void write_grid_f32(const std::filesystem::path& path, const Grid<double>& grid);
Grid<double> read_grid_f32(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);

/// Masks use the same raw format with values 0.0/1.0.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);

/// 8-bit binary PGM (P5), foreground as 255.
void write_mask_pgm(std::ostream& out, const BinaryMask& mask);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_pgm(const std::filesystem::path& path);

/// Grayscale PGM of a [0,1] grid, for gallery panels.
void write_gray_pgm(const std::filesystem::path& path, const Grid<double>& grid);

}  // namespace acwe
