#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "debris/geotile/tiling.hpp"

namespace debris::geotile {

// On-disk record of one raster's tiling.
struct TileIndex {
  static constexpr int kSchemaVersion = 1;

  std::string source;  // raster path as given
  RasterFrame frame;
  double ground_size_m = kDefaultGroundSizeM;
  std::vector<TileRef> tiles;
  std::vector<std::string> tile_paths;  // parallel to tiles; may be empty
};

void to_json(nlohmann::json& j, const PixelWindow& w);
void from_json(const nlohmann::json& j, PixelWindow& w);
void to_json(nlohmann::json& j, const TileRef& t);
void from_json(const nlohmann::json& j, TileRef& t);
void to_json(nlohmann::json& j, const TileIndex& index);
void from_json(const nlohmann::json& j, TileIndex& index);

void write_tile_index(const std::filesystem::path& path, const TileIndex& index);
TileIndex read_tile_index(const std::filesystem::path& path);

}  // namespace debris::geotile
