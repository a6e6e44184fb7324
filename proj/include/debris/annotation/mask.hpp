#pragma once

#include <cstdint>
#include <filesystem>

#include "debris/annotation/density.hpp"
#include "debris/common/grid.hpp"

namespace debris::annotation {

// Per-pixel density labels; every entry is 0, 1 or 2.
class DenseMask {
 public:
  DenseMask() = default;
  DenseMask(int rows, int cols, DensityLevel fill = DensityLevel::kNoDebris)
      : labels_(rows, cols, static_cast<std::uint8_t>(fill)) {}
  // Throws ContractError if any value is outside {0,1,2}.
  explicit DenseMask(Grid<std::uint8_t> labels);

  int rows() const { return labels_.rows(); }
  int cols() const { return labels_.cols(); }
  bool same_shape(const DenseMask& other) const { return labels_.same_shape(other.labels_); }

  std::uint8_t operator()(int r, int c) const { return labels_(r, c); }
  DensityLevel level(int r, int c) const { return static_cast<DensityLevel>(labels_(r, c)); }
  void set(int r, int c, DensityLevel level) { labels_(r, c) = static_cast<std::uint8_t>(level); }

  const Grid<std::uint8_t>& grid() const { return labels_; }

  friend bool operator==(const DenseMask&, const DenseMask&) = default;

 private:
  Grid<std::uint8_t> labels_;
};

// Mask PNGs store the raw label values in one 8-bit channel (grayscale or
// palette indices). Any value outside {0,1,2} is a load error naming the file.
DenseMask read_mask(const std::filesystem::path& path);

// Writes a paletted PNG: 0 transparent, 1 amber, 2 red.
void write_mask(const std::filesystem::path& path, const DenseMask& mask);

}  // namespace debris::annotation
