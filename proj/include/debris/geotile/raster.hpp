#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "debris/common/image.hpp"

namespace debris::geotile {

// North-up geotransform. The origin is the outer top-left corner of the
// top-left pixel; gsd is identical along both axes.
struct GeoTransform {
  double origin_easting = 0.0;
  double origin_northing = 0.0;
  double gsd_m = 1.0;

  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

// Pixel grid shape plus its georeferencing, without pixel data.
struct RasterFrame {
  int height_px = 0;
  int width_px = 0;
  GeoTransform transform;
  std::string crs_id;
};

class GeoRaster {
 public:
  // Throws on gsd <= 0 or an empty pixel grid.
  GeoRaster(RgbImage pixels, GeoTransform transform, std::string crs_id = {});

  const RgbImage& pixels() const { return pixels_; }
  const GeoTransform& transform() const { return transform_; }
  double gsd_m() const { return transform_.gsd_m; }
  int height_px() const { return pixels_.height(); }
  int width_px() const { return pixels_.width(); }
  const std::string& crs_id() const { return crs_id_; }
  RasterFrame frame() const { return {height_px(), width_px(), transform_, crs_id_}; }

 private:
  RgbImage pixels_;
  GeoTransform transform_;
  std::string crs_id_;
};

// World files hold six coefficients (A D B E C F) with C/F at the centre of
// the top-left pixel.
struct WorldFile {
  double a = 0, d = 0, b = 0, e = 0, c = 0, f = 0;
};

WorldFile parse_world_file(const std::string& text, const std::string& source_name);
GeoTransform to_geotransform(const WorldFile& wf, const std::string& source_name);
WorldFile to_world_file(const GeoTransform& transform);
std::string format_world_file(const WorldFile& wf);

// Sidecar candidates for an image path: .pgw style, .pngw style and .wld.
std::vector<std::filesystem::path> world_file_candidates(const std::filesystem::path& image_path);
std::filesystem::path world_file_path_for(const std::filesystem::path& image_path);

// Reads the sidecar georeferencing of image_path. Throws GeoreferenceError
// ("ungeoreferenced input: ...") when missing, incomplete or ambiguous.
GeoTransform read_georeference(const std::filesystem::path& image_path, std::string* crs_id = nullptr);
void write_georeference(const std::filesystem::path& image_path, const GeoTransform& transform,
                        const std::string& crs_id);

// PNG through libpng, anything else through OpenCV; alpha is dropped.
RgbImage read_rgb_image(const std::filesystem::path& path);

GeoRaster load_raster(const std::filesystem::path& path);

}  // namespace debris::geotile
