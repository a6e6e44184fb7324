#pragma once

#include <string>
#include <vector>

#include "debris/common/image.hpp"
#include "debris/geotile/raster.hpp"

namespace debris::geotile {

inline constexpr double kDefaultGroundSizeM = 50.0;
// Edge remainders narrower than this are folded into the neighbouring tile.
inline constexpr int kMinEdgeTilePx = 16;

struct PixelWindow {
  int row0 = 0;
  int col0 = 0;
  int n_rows = 0;
  int n_cols = 0;

  friend bool operator==(const PixelWindow&, const PixelWindow&) = default;
};

struct GeoBounds {
  double min_easting = 0.0;
  double min_northing = 0.0;
  double max_easting = 0.0;
  double max_northing = 0.0;
};

struct TileRef {
  std::string tile_id;
  int grid_row = 0;
  int grid_col = 0;
  PixelWindow pixel_window;
  GeoBounds geo_bounds;
};

// round(ground_size_m / gsd_m); throws ConfigError when that is below 1 px.
int tile_side_px(double gsd_m, double ground_size_m = kDefaultGroundSizeM);

GeoBounds window_bounds(const GeoTransform& transform, const PixelWindow& window);

// Splits one axis of `extent` pixels into [start, length) spans of `side`.
std::vector<std::pair<int, int>> plan_axis(int extent, int side);

// Row-major, non-overlapping tiling that covers the whole raster. Interior
// tiles are side x side; the last row/column is clamped to the raster edge,
// and a remainder thinner than kMinEdgeTilePx extends the previous tile.
std::vector<TileRef> plan_tiles(const RasterFrame& frame, double ground_size_m = kDefaultGroundSizeM,
                                const std::string& id_prefix = {});
std::vector<TileRef> plan_tiles(const GeoRaster& raster, double ground_size_m = kDefaultGroundSizeM,
                                const std::string& id_prefix = {});

RgbImage extract_tile(const GeoRaster& raster, const TileRef& tile);
RgbImage crop(const RgbImage& image, const PixelWindow& window);

}  // namespace debris::geotile
