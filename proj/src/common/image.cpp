#include "debris/common/image.hpp"

#include <string>

namespace debris {

RgbImage::RgbImage(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw ShapeError("image dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(height) * width * 3, fill);
}

RgbImage::RgbImage(int height, int width, std::vector<std::uint8_t> interleaved)
    : height_(height), width_(width), data_(std::move(interleaved)) {
  if (height < 0 || width < 0 ||
      data_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw ShapeError("RGB buffer of " + std::to_string(data_.size()) + " bytes does not match " +
                     std::to_string(height) + "x" + std::to_string(width) + "x3");
  }
}

}  // namespace debris
