#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "debris/annotation/mask.hpp"
#include "debris/geotile/tiling.hpp"

namespace debris::geotile {

struct TilePrediction {
  TileRef tile;
  annotation::DenseMask mask;  // at pixel_window dimensions
};

struct Mosaic {
  annotation::DenseMask labels;
  GeoTransform transform;
  std::string crs_id;
  std::vector<std::string> provenance;  // contributing tile ids, in input order
  std::vector<TileRef> tiles;
};

// Pastes every tile mask into its window. Throws CoverageError describing
// the bounding window of any gap or overlap, and ShapeError when a mask does
// not match its window.
Mosaic merge_mosaic(const RasterFrame& frame, std::span<const TilePrediction> tiles);

// Writes <png_path> (paletted labels), its world file and
// <stem>.provenance.json listing tile ids and geo bounds.
void write_mosaic(const std::filesystem::path& png_path, const Mosaic& mosaic);

std::filesystem::path provenance_path_for(const std::filesystem::path& png_path);

}  // namespace debris::geotile
