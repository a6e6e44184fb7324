#pragma once

#include "debris/annotation/mask.hpp"
#include "debris/common/image.hpp"

namespace debris::geotile {

inline constexpr int kPatchSize = 16;
inline constexpr int kModelInputPx = 352;

// Bilinear resize (half-pixel centres, edge clamped) to target_px square.
// target_px must be a positive multiple of the encoder patch size.
RgbImage resize_for_model(const RgbImage& crop, int target_px = kModelInputPx);

RgbImage resize_bilinear(const RgbImage& image, int out_rows, int out_cols);

// Nearest-neighbour resampling; never invents labels.
annotation::DenseMask resize_nearest(const annotation::DenseMask& mask, int out_rows, int out_cols);

}  // namespace debris::geotile
