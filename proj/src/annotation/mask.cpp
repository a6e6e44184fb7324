#include "debris/annotation/mask.hpp"

#include <string>

#include "debris/common/png_io.hpp"

namespace debris::annotation {

DenseMask::DenseMask(Grid<std::uint8_t> labels) : labels_(std::move(labels)) {
  for (auto v : labels_.values())
    if (v > 2) throw ContractError("label value " + std::to_string(v) + " outside {0,1,2}");
}

DenseMask read_mask(const std::filesystem::path& path) {
  Grid<std::uint8_t> raw = read_png_channel(path);
  for (int r = 0; r < raw.rows(); ++r) {
    for (int c = 0; c < raw.cols(); ++c) {
      if (raw(r, c) > 2) {
        throw DecodeError(path.string() + ": label value " + std::to_string(raw(r, c)) + " at (" +
                          std::to_string(r) + "," + std::to_string(c) + ") outside {0,1,2}");
      }
    }
  }
  return DenseMask(std::move(raw));
}

void write_mask(const std::filesystem::path& path, const DenseMask& mask) {
  static const std::vector<PaletteEntry> kPalette = {
      {0, 0, 0, 0}, {255, 191, 0, 255}, {220, 20, 60, 255}};
  write_png_indexed(path, mask.grid(), kPalette);
}

}  // namespace debris::annotation
