#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "jointrecon/grid.hpp"

namespace jointrecon {

// JRG1 grid files: the 8-byte magic "JRGRID01", one JSON header line
// {"dtype": "f32" | "c64as2f32", "height": H, "width": W} terminated by '\n',
// then the row-major little-endian float32 payload. Complex grids interleave
// (re, im). Values are rounded to float32 on save.

void save_grid(const RealGrid& grid, const std::filesystem::path& path);
void save_grid(const ComplexGrid& grid, const std::filesystem::path& path);

using AnyGrid = std::variant<RealGrid, ComplexGrid>;

AnyGrid load_grid(const std::filesystem::path& path);
RealGrid load_real_grid(const std::filesystem::path& path);
ComplexGrid load_complex_grid(const std::filesystem::path& path);

/// Encode to / decode from an in-memory JRG1 byte string.
std::string encode_grid(const RealGrid& grid);
std::string encode_grid(const ComplexGrid& grid);
AnyGrid decode_grid(const std::string& bytes);

/// Rounds every entry to the nearest float32, i.e. what a save/load cycle yields.
RealGrid round_to_f32(const RealGrid& grid);
ComplexGrid round_to_f32(const ComplexGrid& grid);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace jointrecon
