#include "debris/geotile/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "debris/common/error.hpp"

namespace debris::geotile {

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

RgbImage resize_bilinear(const RgbImage& image, int out_rows, int out_cols) {
  if (image.empty()) throw EmptyInputError("cannot resize an empty image");
  if (out_rows < 1 || out_cols < 1) throw ShapeError("resize target must be at least 1x1");
  if (out_rows == image.height() && out_cols == image.width()) return image;
  const auto ry = bilinear_taps(image.height(), out_rows);
  const auto rx = bilinear_taps(image.width(), out_cols);
  RgbImage out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    const Tap& ty = ry[r];
    for (int c = 0; c < out_cols; ++c) {
      const Tap& tx = rx[c];
      for (int ch = 0; ch < 3; ++ch) {
        const double top = image.at(ty.lo, tx.lo, ch) * (1.0 - tx.frac) + image.at(ty.lo, tx.hi, ch) * tx.frac;
        const double bottom = image.at(ty.hi, tx.lo, ch) * (1.0 - tx.frac) + image.at(ty.hi, tx.hi, ch) * tx.frac;
        const double v = top * (1.0 - ty.frac) + bottom * ty.frac;
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

RgbImage resize_for_model(const RgbImage& crop, int target_px) {
  if (target_px < kPatchSize || target_px % kPatchSize != 0)
    throw ConfigError("model input size " + std::to_string(target_px) + " is not a positive multiple of the patch size " +
                      std::to_string(kPatchSize));
  if (crop.empty()) throw EmptyInputError("cannot resize an empty crop");
  return resize_bilinear(crop, target_px, target_px);
}

annotation::DenseMask resize_nearest(const annotation::DenseMask& mask, int out_rows, int out_cols) {
  if (mask.rows() < 1 || mask.cols() < 1) throw EmptyInputError("cannot resize an empty mask");
  if (out_rows < 1 || out_cols < 1) throw ShapeError("resize target must be at least 1x1");
  if (out_rows == mask.rows() && out_cols == mask.cols()) return mask;
  std::vector<int> src_r(out_rows), src_c(out_cols);
  for (int r = 0; r < out_rows; ++r)
    src_r[r] = std::min(mask.rows() - 1, static_cast<int>((static_cast<long long>(r) * 2 + 1) * mask.rows() / (2LL * out_rows)));
  for (int c = 0; c < out_cols; ++c)
    src_c[c] = std::min(mask.cols() - 1, static_cast<int>((static_cast<long long>(c) * 2 + 1) * mask.cols() / (2LL * out_cols)));
  annotation::DenseMask out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r)
    for (int c = 0; c < out_cols; ++c) out.set(r, c, mask.level(src_r[r], src_c[c]));
  return out;
}

}  // namespace debris::geotile
