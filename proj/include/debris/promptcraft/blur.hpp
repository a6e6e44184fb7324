#pragma once

#include <vector>

#include "debris/common/grid.hpp"
#include "debris/common/image.hpp"

namespace debris::promptcraft {

// Normalised 1-D Gaussian taps for offsets -radius..radius, radius = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma_px);

// Gaussian blur restricted to pixels where `region` is non-zero. Pixels
// outside the region neither contribute nor change. Kernel mass that would
// fall outside the region or the image stays on the centre pixel, so the
// operator is symmetric and doubly stochastic over the region: constants are
// preserved and the region's channel sums never grow.
RgbImage masked_gaussian_blur(const RgbImage& image, const BinaryMask& region, double sigma_px);

// Same operator without the final rounding; interleaved RGB values.
std::vector<double> masked_gaussian_blur_values(const RgbImage& image, const BinaryMask& region,
                                                double sigma_px);

}  // namespace debris::promptcraft
