#include "debris/cli/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/png_io.hpp"
#include "debris/geotile/raster.hpp"

namespace debris::cli {

namespace fs = std::filesystem;
using annotation::DensityLevel;

namespace {

std::uint8_t jitter(Rng& rng, int base, int noise) {
  const int v = base + static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * noise + 1))) - noise;
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

}  // namespace

Scene synthetic_scene(Rng& rng, const SceneStyle& style, bool positive) {
  if (style.cell_px < 1 || style.side_px % style.cell_px != 0)
    throw ConfigError("scene side must be a multiple of the cell size");
  const int cells = style.side_px / style.cell_px;
  std::vector<int> cell_level(static_cast<std::size_t>(cells * cells), 0);
  if (positive) {
    if (cells * cells < 2) throw ConfigError("positive scenes need at least two cells");
    for (auto& l : cell_level) {
      const auto u = rng.below(4);
      l = u < 2 ? 0 : static_cast<int>(u) - 1;
    }
    // Guarantee both debris levels on distinct cells.
    const auto a = static_cast<std::size_t>(rng.below(cell_level.size()));
    auto b = static_cast<std::size_t>(rng.below(cell_level.size() - 1));
    if (b >= a) ++b;
    cell_level[a] = 1;
    cell_level[b] = 2;
  }

  Scene scene{RgbImage(style.side_px, style.side_px), annotation::DenseMask(style.side_px, style.side_px)};
  for (int r = 0; r < style.side_px; ++r) {
    for (int c = 0; c < style.side_px; ++c) {
      const int level = cell_level[static_cast<std::size_t>((r / style.cell_px) * cells + c / style.cell_px)];
      const int base = level == 0 ? style.ground : level == 1 ? style.low_density : style.high_density;
      for (int ch = 0; ch < 3; ++ch) scene.image.at(r, c, ch) = jitter(rng, base, style.noise);
      scene.labels.set(r, c, annotation::level_from_int(level));
    }
  }
  return scene;
}

void write_synthetic_dataset(const fs::path& dir, const SyntheticDatasetSpec& spec) {
  if (spec.annotators < 1) throw ConfigError("synthetic dataset needs at least one annotator");
  Rng rng(spec.seed);
  fs::create_directories(dir / "images");
  for (int a = 0; a < spec.annotators; ++a) fs::create_directories(dir / "annotations" / ("annotator" + std::to_string(a)));

  nlohmann::json index = nlohmann::json::array();
  auto emit = [&](const std::string& id, const std::string& event, const std::string& region, bool positive) {
    const Scene scene = synthetic_scene(rng, spec.style, positive);
    const std::string name = id + ".png";
    write_png_rgb(dir / "images" / name, scene.image);
    std::vector<std::string> annotation_paths;
    for (int a = 0; a < spec.annotators; ++a) {
      annotation::DenseMask mask = scene.labels;
      // The last annotator (when there are at least three) under-labels some
      // pixels by one level; ceil((k*t + t - 1) / (k+1)) = t for k >= 2.
      if (spec.annotators >= 3 && a == spec.annotators - 1) {
        for (int r = 0; r < mask.rows(); ++r)
          for (int c = 0; c < mask.cols(); ++c)
            if (mask(r, c) > 0 && rng.below(5) == 0)
              mask.set(r, c, annotation::level_from_int(mask(r, c) - 1));
      }
      const fs::path rel = fs::path("annotations") / ("annotator" + std::to_string(a)) / name;
      annotation::write_mask(dir / rel, mask);
      annotation_paths.push_back(rel.generic_string());
    }
    index.push_back({{"image_id", id},
                     {"event", event},
                     {"region", region},
                     {"image_path", (fs::path("images") / name).generic_string()},
                     {"annotation_paths", annotation_paths}});
  };

  char id[32];
  for (int i = 0; i < spec.train_event_images; ++i) {
    const bool ian = i % 2 == 0;
    std::snprintf(id, sizeof id, "%s_%04d", ian ? "ian" : "ike", i);
    // Three in four training images carry debris.
    emit(id, ian ? "ian" : "ike", ian ? "fort_myers" : "galveston", i % 4 != 3);
  }
  for (int i = 0; i < spec.test_positive + spec.test_negative; ++i) {
    std::snprintf(id, sizeof id, "ida_%04d", i);
    emit(id, "ida", "grand_isle", i < spec.test_positive);
  }
  write_text_atomic(dir / "dataset_index.json", index.dump(2) + "\n");

  // Debris-free regional raster at one model tile per side_px pixels.
  fs::create_directories(dir / "raster");
  SceneStyle raster_style = spec.style;
  raster_style.side_px = spec.raster_px;
  if (spec.raster_px % spec.style.cell_px != 0) raster_style.cell_px = 1;
  const Scene ground = synthetic_scene(rng, raster_style, false);
  const fs::path raster_path = dir / "raster" / "region.png";
  write_png_rgb(raster_path, ground.image);
  const double gsd = 50.0 / static_cast<double>(spec.style.side_px);
  geotile::write_georeference(raster_path, geotile::GeoTransform{500000.0, 3300000.0, gsd}, "EPSG:32616");
}

PipelineConfig synthetic_pipeline_config(const SyntheticDatasetSpec& spec) {
  PipelineConfig c;
  c.raster_dir = "raster";
  c.dataset_index = "dataset_index.json";
  c.output_root = "out";
  c.target_px = spec.style.side_px;
  c.held_out_event = "ida";
  c.val_fraction = 0.2;
  c.seed = spec.seed;
  c.mock = {32, 3, 16, spec.seed};
  c.decoder.token_dim = 32;
  c.decoder.n_heads = 2;
  c.decoder.ffn_dim = 32;
  c.decoder.extract_layers = {1, 2, 3};
  c.decoder.encoder_width = 32;
  c.decoder_seed = spec.seed;
  c.training.epochs = 200;
  c.training.batch_size = 8;
  c.training.checkpoint_every = 50;
  c.training.mixed_precision = false;
  c.training.seed = spec.seed;
  return c;
}

}  // namespace debris::cli
