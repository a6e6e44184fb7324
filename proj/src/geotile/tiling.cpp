#include "debris/geotile/tiling.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "debris/common/error.hpp"

namespace debris::geotile {

int tile_side_px(double gsd_m, double ground_size_m) {
  if (!(gsd_m > 0.0)) throw ConfigError("gsd must be positive");
  if (!(ground_size_m > 0.0)) throw ConfigError("ground_size_m must be positive");
  const double ratio = ground_size_m / gsd_m;
  if (!std::isfinite(ratio) || ratio > 1e9) throw ConfigError("tile side overflows");
  const long side = std::lround(ratio);
  if (side < 1)
    throw ConfigError("ground footprint " + std::to_string(ground_size_m) + " m is smaller than one pixel at " +
                      std::to_string(gsd_m) + " m/px");
  return static_cast<int>(side);
}

GeoBounds window_bounds(const GeoTransform& t, const PixelWindow& w) {
  return {t.origin_easting + w.col0 * t.gsd_m, t.origin_northing - (w.row0 + w.n_rows) * t.gsd_m,
          t.origin_easting + (w.col0 + w.n_cols) * t.gsd_m, t.origin_northing - w.row0 * t.gsd_m};
}

std::vector<std::pair<int, int>> plan_axis(int extent, int side) {
  std::vector<std::pair<int, int>> spans;
  const int full = extent / side;
  const int remainder = extent % side;
  for (int i = 0; i < full; ++i) spans.emplace_back(i * side, side);
  if (remainder > 0) {
    if (full > 0 && remainder < kMinEdgeTilePx)
      spans.back().second += remainder;
    else
      spans.emplace_back(full * side, remainder);
  }
  return spans;
}

std::vector<TileRef> plan_tiles(const RasterFrame& frame, double ground_size_m, const std::string& id_prefix) {
  if (frame.height_px < 1 || frame.width_px < 1) throw EmptyInputError("raster is smaller than one pixel");
  const int side = tile_side_px(frame.transform.gsd_m, ground_size_m);
  const auto rows = plan_axis(frame.height_px, side);
  const auto cols = plan_axis(frame.width_px, side);

  std::vector<TileRef> tiles;
  tiles.reserve(rows.size() * cols.size());
  char id[48];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      TileRef t;
      std::snprintf(id, sizeof(id), "r%03zu_c%03zu", i, j);
      t.tile_id = id_prefix.empty() ? id : id_prefix + "_" + id;
      t.grid_row = static_cast<int>(i);
      t.grid_col = static_cast<int>(j);
      t.pixel_window = {rows[i].first, cols[j].first, rows[i].second, cols[j].second};
      t.geo_bounds = window_bounds(frame.transform, t.pixel_window);
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<TileRef> plan_tiles(const GeoRaster& raster, double ground_size_m, const std::string& id_prefix) {
  return plan_tiles(raster.frame(), ground_size_m, id_prefix);
}

RgbImage crop(const RgbImage& image, const PixelWindow& w) {
  if (w.n_rows < 1 || w.n_cols < 1 || w.row0 < 0 || w.col0 < 0 || w.row0 + w.n_rows > image.height() ||
      w.col0 + w.n_cols > image.width()) {
    throw BoundsError("window (" + std::to_string(w.row0) + "," + std::to_string(w.col0) + ") " +
                      std::to_string(w.n_rows) + "x" + std::to_string(w.n_cols) + " exceeds " +
                      std::to_string(image.height()) + "x" + std::to_string(image.width()) + " image");
  }
  RgbImage out(w.n_rows, w.n_cols);
  const std::size_t row_bytes = static_cast<std::size_t>(w.n_cols) * 3;
  const auto src = image.bytes();
  auto dst = out.bytes();
  for (int r = 0; r < w.n_rows; ++r) {
    const std::size_t offset = (static_cast<std::size_t>(w.row0 + r) * image.width() + w.col0) * 3;
    std::memcpy(dst.data() + static_cast<std::size_t>(r) * row_bytes, src.data() + offset, row_bytes);
  }
  return out;
}

RgbImage extract_tile(const GeoRaster& raster, const TileRef& tile) { return crop(raster.pixels(), tile.pixel_window); }

}  // namespace debris::geotile
