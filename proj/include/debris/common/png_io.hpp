#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "debris/common/grid.hpp"
#include "debris/common/image.hpp"

namespace debris {

struct PaletteEntry {
  std::uint8_t r, g, b, a;
};

// Decodes any 8/16-bit PNG to RGB. Alpha is dropped, gray is replicated and
// palettes are expanded.
RgbImage read_png_rgb(const std::filesystem::path& path);

// Decodes a single-channel PNG (8-bit gray or 8-bit palette) to its raw
// sample values; palette images yield indices, not colours.
Grid<std::uint8_t> read_png_channel(const std::filesystem::path& path);

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& values);
void write_png_indexed(const std::filesystem::path& path, const Grid<std::uint8_t>& indices,
                       const std::vector<PaletteEntry>& palette);

}  // namespace debris
