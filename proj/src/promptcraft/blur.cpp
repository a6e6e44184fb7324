#include "debris/promptcraft/blur.hpp"

#include <algorithm>
#include <cmath>

#include "debris/common/error.hpp"

namespace debris::promptcraft {

std::vector<double> gaussian_kernel(double sigma_px) {
  if (!(sigma_px > 0.0) || !std::isfinite(sigma_px)) throw DomainError("blur sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_px)));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
    sum += taps[i + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

// Separable zero-padded convolution of a single-channel plane.
std::vector<double> convolve(const std::vector<double>& plane, int rows, int cols, const std::vector<double>& k) {
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(plane.size(), 0.0), out(plane.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      const int lo = std::max(0, c - radius), hi = std::min(cols - 1, c + radius);
      for (int q = lo; q <= hi; ++q) acc += k[q - c + radius] * plane[static_cast<std::size_t>(r) * cols + q];
      tmp[static_cast<std::size_t>(r) * cols + c] = acc;
    }
  }
  for (int r = 0; r < rows; ++r) {
    const int lo = std::max(0, r - radius), hi = std::min(rows - 1, r + radius);
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int q = lo; q <= hi; ++q) acc += k[q - r + radius] * tmp[static_cast<std::size_t>(q) * cols + c];
      out[static_cast<std::size_t>(r) * cols + c] = acc;
    }
  }
  return out;
}

}  // namespace

std::vector<double> masked_gaussian_blur_values(const RgbImage& image, const BinaryMask& region, double sigma_px) {
  if (region.rows() != image.height() || region.cols() != image.width())
    throw ShapeError("blur region does not match the image");
  const auto k = gaussian_kernel(sigma_px);
  const int rows = image.height(), cols = image.width();
  const std::size_t n = static_cast<std::size_t>(rows) * cols;

  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = region.values()[i] ? 1.0 : 0.0;
  const std::vector<double> reach = convolve(m, rows, cols, k);

  std::vector<double> out(image.bytes().begin(), image.bytes().end());
  std::vector<double> plane(n);
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < n; ++i) plane[i] = m[i] * image.bytes()[i * 3 + ch];
    const std::vector<double> mixed = convolve(plane, rows, cols, k);
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] == 0.0) continue;
      out[i * 3 + ch] = mixed[i] + (1.0 - reach[i]) * image.bytes()[i * 3 + ch];
    }
  }
  return out;
}

RgbImage masked_gaussian_blur(const RgbImage& image, const BinaryMask& region, double sigma_px) {
  const std::vector<double> values = masked_gaussian_blur_values(image, region, sigma_px);
  RgbImage out = image;
  for (std::size_t i = 0; i < values.size(); ++i)
    out.bytes()[i] = static_cast<std::uint8_t>(std::clamp(std::floor(values[i] + 0.5), 0.0, 255.0));
  return out;
}

}  // namespace debris::promptcraft
