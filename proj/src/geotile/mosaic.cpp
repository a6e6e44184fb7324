#include "debris/geotile/mosaic.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"

namespace debris::geotile {

namespace fs = std::filesystem;

namespace {

struct Extent {
  int min_r = std::numeric_limits<int>::max();
  int min_c = std::numeric_limits<int>::max();
  int max_r = -1;
  int max_c = -1;
  long long count = 0;

  void add(int r, int c) {
    min_r = std::min(min_r, r);
    min_c = std::min(min_c, c);
    max_r = std::max(max_r, r);
    max_c = std::max(max_c, c);
    ++count;
  }
  std::string describe() const {
    return "window (" + std::to_string(min_r) + "," + std::to_string(min_c) + ") " +
           std::to_string(max_r - min_r + 1) + "x" + std::to_string(max_c - min_c + 1) + ", " +
           std::to_string(count) + " px";
  }
};

}  // namespace

Mosaic merge_mosaic(const RasterFrame& frame, std::span<const TilePrediction> tiles) {
  if (frame.height_px < 1 || frame.width_px < 1) throw EmptyInputError("mosaic frame is empty");
  Grid<std::uint8_t> coverage(frame.height_px, frame.width_px, 0);
  Grid<std::uint8_t> labels(frame.height_px, frame.width_px, 0);
  Mosaic out;
  out.transform = frame.transform;
  out.crs_id = frame.crs_id;

  for (const auto& tp : tiles) {
    const PixelWindow& w = tp.tile.pixel_window;
    if (w.row0 < 0 || w.col0 < 0 || w.n_rows < 1 || w.n_cols < 1 || w.row0 + w.n_rows > frame.height_px ||
        w.col0 + w.n_cols > frame.width_px) {
      throw CoverageError("tile " + tp.tile.tile_id + " lies outside the " + std::to_string(frame.height_px) + "x" +
                          std::to_string(frame.width_px) + " mosaic");
    }
    if (tp.mask.rows() != w.n_rows || tp.mask.cols() != w.n_cols) {
      throw ShapeError("tile " + tp.tile.tile_id + " mask is " + std::to_string(tp.mask.rows()) + "x" +
                       std::to_string(tp.mask.cols()) + " but its window is " + std::to_string(w.n_rows) + "x" +
                       std::to_string(w.n_cols));
    }
    for (int r = 0; r < w.n_rows; ++r) {
      for (int c = 0; c < w.n_cols; ++c) {
        auto& cov = coverage(w.row0 + r, w.col0 + c);
        if (cov < 255) ++cov;
        labels(w.row0 + r, w.col0 + c) = tp.mask(r, c);
      }
    }
    out.provenance.push_back(tp.tile.tile_id);
    out.tiles.push_back(tp.tile);
  }

  Extent gaps, overlaps;
  for (int r = 0; r < frame.height_px; ++r) {
    for (int c = 0; c < frame.width_px; ++c) {
      if (coverage(r, c) == 0) gaps.add(r, c);
      if (coverage(r, c) > 1) overlaps.add(r, c);
    }
  }
  if (gaps.count > 0 || overlaps.count > 0) {
    std::string message = "tiles do not partition the mosaic:";
    if (gaps.count > 0) message += " gap " + gaps.describe() + ";";
    if (overlaps.count > 0) message += " overlap " + overlaps.describe() + ";";
    throw CoverageError(message);
  }
  out.labels = annotation::DenseMask(std::move(labels));
  return out;
}

fs::path provenance_path_for(const fs::path& png_path) {
  return png_path.parent_path() / (png_path.stem().string() + ".provenance.json");
}

void write_mosaic(const fs::path& png_path, const Mosaic& mosaic) {
  annotation::write_mask(png_path, mosaic.labels);
  write_georeference(png_path, mosaic.transform, mosaic.crs_id);

  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["height_px"] = mosaic.labels.rows();
  doc["width_px"] = mosaic.labels.cols();
  doc["gsd_m"] = mosaic.transform.gsd_m;
  doc["origin"] = {mosaic.transform.origin_easting, mosaic.transform.origin_northing};
  doc["crs_id"] = mosaic.crs_id;
  doc["palette"] = {{"0", "no-debris (transparent)"}, {"1", "low-density"}, {"2", "high-density"}};
  auto& tiles = doc["tiles"] = nlohmann::json::array();
  for (const auto& t : mosaic.tiles) {
    tiles.push_back({{"tile_id", t.tile_id},
                     {"geo_bounds",
                      {t.geo_bounds.min_easting, t.geo_bounds.min_northing, t.geo_bounds.max_easting,
                       t.geo_bounds.max_northing}}});
  }
  write_text_atomic(provenance_path_for(png_path), doc.dump(2) + "\n");
}

}  // namespace debris::geotile
