#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "debris/common/error.hpp"

namespace debris {

// 8-bit RGB image, channels interleaved, rows top to bottom.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width, std::uint8_t fill = 0);
  RgbImage(int height, int width, std::vector<std::uint8_t> interleaved);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return height_ == 0 || width_ == 0; }

  std::uint8_t& at(int row, int col, int channel) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  std::uint8_t at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }

  std::span<std::uint8_t> bytes() { return data_; }
  std::span<const std::uint8_t> bytes() const { return data_; }

  // Rec. 601 luma of one pixel.
  double luminance(int row, int col) const {
    return 0.299 * at(row, col, 0) + 0.587 * at(row, col, 1) + 0.114 * at(row, col, 2);
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace debris
