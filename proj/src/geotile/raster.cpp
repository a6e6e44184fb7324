#include "debris/geotile/raster.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/png_io.hpp"

namespace debris::geotile {

namespace fs = std::filesystem;

GeoRaster::GeoRaster(RgbImage pixels, GeoTransform transform, std::string crs_id)
    : pixels_(std::move(pixels)), transform_(transform), crs_id_(std::move(crs_id)) {
  if (!(transform_.gsd_m > 0.0) || !std::isfinite(transform_.gsd_m))
    throw GeoreferenceError("ground sample distance must be positive");
  if (!std::isfinite(transform_.origin_easting) || !std::isfinite(transform_.origin_northing))
    throw GeoreferenceError("raster origin must be finite");
  if (pixels_.empty()) throw EmptyInputError("raster has no pixels");
}

WorldFile parse_world_file(const std::string& text, const std::string& source_name) {
  static constexpr const char* kNames[6] = {"A (pixel width)", "D (row rotation)", "B (column rotation)",
                                            "E (pixel height)", "C (top-left easting)",
                                            "F (top-left northing)"};
  std::istringstream in(text);
  double values[6];
  for (int i = 0; i < 6; ++i) {
    std::string token;
    if (!(in >> token)) {
      throw GeoreferenceError("ungeoreferenced input: " + source_name + " is missing coefficient " + kNames[i]);
    }
    try {
      std::size_t used = 0;
      values[i] = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw GeoreferenceError("ungeoreferenced input: " + source_name + " has a non-numeric coefficient " +
                              kNames[i] + " ('" + token + "')");
    }
  }
  return {values[0], values[1], values[2], values[3], values[4], values[5]};
}

GeoTransform to_geotransform(const WorldFile& wf, const std::string& source_name) {
  if (wf.d != 0.0 || wf.b != 0.0)
    throw GeoreferenceError(source_name + ": rotated geotransforms are not supported");
  if (!(wf.a > 0.0) || !(wf.e < 0.0))
    throw GeoreferenceError(source_name + ": expected a north-up geotransform (A > 0, E < 0)");
  const double gx = wf.a;
  const double gy = -wf.e;
  if (std::abs(gx - gy) > 1e-9 * std::max(gx, gy))
    throw GeoreferenceError(source_name + ": anisotropic ground sample distance (" + std::to_string(gx) +
                            " x " + std::to_string(gy) + " m) is not supported");
  return {wf.c - 0.5 * gx, wf.f + 0.5 * gy, gx};
}

WorldFile to_world_file(const GeoTransform& t) {
  return {t.gsd_m, 0.0, 0.0, -t.gsd_m, t.origin_easting + 0.5 * t.gsd_m, t.origin_northing - 0.5 * t.gsd_m};
}

std::string format_world_file(const WorldFile& wf) {
  std::string out;
  char line[64];
  for (double v : {wf.a, wf.d, wf.b, wf.e, wf.c, wf.f}) {
    std::snprintf(line, sizeof(line), "%.17g\n", v);
    out += line;
  }
  return out;
}

std::vector<fs::path> world_file_candidates(const fs::path& image_path) {
  std::vector<fs::path> out;
  std::string ext = image_path.extension().string();
  if (ext.size() >= 3) {
    // ".png" -> ".pgw"
    std::string short_ext = std::string(".") + ext[1] + ext.back() + "w";
    out.push_back(fs::path(image_path).replace_extension(short_ext));
  }
  if (!ext.empty()) out.push_back(fs::path(image_path).replace_extension(ext + "w"));
  out.push_back(fs::path(image_path).replace_extension(".wld"));
  return out;
}

fs::path world_file_path_for(const fs::path& image_path) { return world_file_candidates(image_path).front(); }

GeoTransform read_georeference(const fs::path& image_path, std::string* crs_id) {
  std::vector<std::pair<fs::path, WorldFile>> found;
  for (const auto& candidate : world_file_candidates(image_path)) {
    if (fs::exists(candidate))
      found.emplace_back(candidate, parse_world_file(read_text_file(candidate), candidate.string()));
  }
  if (found.empty()) {
    throw GeoreferenceError("ungeoreferenced input: " + image_path.string() +
                            " has no geotransform (expected a world file such as " +
                            world_file_path_for(image_path).string() + ")");
  }
  for (std::size_t i = 1; i < found.size(); ++i) {
    const auto& a = found[0].second;
    const auto& b = found[i].second;
    if (a.a != b.a || a.b != b.b || a.c != b.c || a.d != b.d || a.e != b.e || a.f != b.f) {
      throw GeoreferenceError("ungeoreferenced input: ambiguous geotransform, " + found[0].first.string() +
                              " and " + found[i].first.string() + " disagree");
    }
  }
  if (crs_id) {
    crs_id->clear();
    const fs::path prj = fs::path(image_path).replace_extension(".prj");
    if (fs::exists(prj)) {
      std::string text = read_text_file(prj);
      auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
      text.erase(text.begin(), std::find_if(text.begin(), text.end(), not_space));
      text.erase(std::find_if(text.rbegin(), text.rend(), not_space).base(), text.end());
      *crs_id = text;
    }
  }
  return to_geotransform(found.front().second, found.front().first.string());
}

void write_georeference(const fs::path& image_path, const GeoTransform& transform, const std::string& crs_id) {
  write_text_atomic(world_file_path_for(image_path), format_world_file(to_world_file(transform)));
  if (!crs_id.empty()) write_text_atomic(fs::path(image_path).replace_extension(".prj"), crs_id + "\n");
}

RgbImage read_rgb_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return read_png_rgb(path);

  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DecodeError("cannot decode " + path.string() + " as an RGB raster");
  if (bgr.depth() != CV_8U || bgr.channels() != 3)
    throw DecodeError(path.string() + " did not decode to 8-bit RGB");
  RgbImage image(bgr.rows, bgr.cols);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      image.at(r, c, 0) = row[c][2];
      image.at(r, c, 1) = row[c][1];
      image.at(r, c, 2) = row[c][0];
    }
  }
  return image;
}

GeoRaster load_raster(const fs::path& path) {
  RgbImage pixels = read_rgb_image(path);
  std::string crs;
  GeoTransform transform = read_georeference(path, &crs);
  return GeoRaster(std::move(pixels), transform, std::move(crs));
}

}  // namespace debris::geotile
