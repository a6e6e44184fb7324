#include "debris/geotile/tile_index.hpp"

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"

namespace debris::geotile {

using nlohmann::json;

void to_json(json& j, const PixelWindow& w) {
  j = json{{"row0", w.row0}, {"col0", w.col0}, {"n_rows", w.n_rows}, {"n_cols", w.n_cols}};
}

void from_json(const json& j, PixelWindow& w) {
  j.at("row0").get_to(w.row0);
  j.at("col0").get_to(w.col0);
  j.at("n_rows").get_to(w.n_rows);
  j.at("n_cols").get_to(w.n_cols);
}

void to_json(json& j, const TileRef& t) {
  j = json{{"tile_id", t.tile_id},
           {"grid_row", t.grid_row},
           {"grid_col", t.grid_col},
           {"pixel_window", t.pixel_window},
           {"geo_bounds",
            {t.geo_bounds.min_easting, t.geo_bounds.min_northing, t.geo_bounds.max_easting,
             t.geo_bounds.max_northing}}};
}

void from_json(const json& j, TileRef& t) {
  j.at("tile_id").get_to(t.tile_id);
  j.at("grid_row").get_to(t.grid_row);
  j.at("grid_col").get_to(t.grid_col);
  j.at("pixel_window").get_to(t.pixel_window);
  const auto& b = j.at("geo_bounds");
  if (!b.is_array() || b.size() != 4) throw DecodeError("geo_bounds must hold four numbers");
  t.geo_bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
}

void to_json(json& j, const TileIndex& index) {
  j = json{{"schema_version", TileIndex::kSchemaVersion},
           {"source", index.source},
           {"height_px", index.frame.height_px},
           {"width_px", index.frame.width_px},
           {"gsd_m", index.frame.transform.gsd_m},
           {"origin", {index.frame.transform.origin_easting, index.frame.transform.origin_northing}},
           {"crs_id", index.frame.crs_id},
           {"ground_size_m", index.ground_size_m},
           {"tiles", json::array()}};
  for (std::size_t i = 0; i < index.tiles.size(); ++i) {
    json t = index.tiles[i];
    if (i < index.tile_paths.size()) t["path"] = index.tile_paths[i];
    j["tiles"].push_back(std::move(t));
  }
}

void from_json(const json& j, TileIndex& index) {
  const int version = j.at("schema_version").get<int>();
  if (version != TileIndex::kSchemaVersion)
    throw DecodeError("unsupported tile index schema_version " + std::to_string(version));
  j.at("source").get_to(index.source);
  j.at("height_px").get_to(index.frame.height_px);
  j.at("width_px").get_to(index.frame.width_px);
  j.at("gsd_m").get_to(index.frame.transform.gsd_m);
  index.frame.transform.origin_easting = j.at("origin").at(0).get<double>();
  index.frame.transform.origin_northing = j.at("origin").at(1).get<double>();
  j.at("crs_id").get_to(index.frame.crs_id);
  j.at("ground_size_m").get_to(index.ground_size_m);
  index.tiles.clear();
  index.tile_paths.clear();
  for (const auto& t : j.at("tiles")) {
    index.tiles.push_back(t.get<TileRef>());
    if (t.contains("path")) index.tile_paths.push_back(t.at("path").get<std::string>());
  }
  if (!index.tile_paths.empty() && index.tile_paths.size() != index.tiles.size())
    throw DecodeError("tile index lists paths for only some tiles");
}

void write_tile_index(const std::filesystem::path& path, const TileIndex& index) {
  write_text_atomic(path, json(index).dump(2) + "\n");
}

TileIndex read_tile_index(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path)).get<TileIndex>();
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

}  // namespace debris::geotile
