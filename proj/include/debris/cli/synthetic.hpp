#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "debris/annotation/mask.hpp"
#include "debris/cli/config.hpp"
#include "debris/common/image.hpp"
#include "debris/common/rng.hpp"

namespace debris::cli {

// Separable toy scenes: dark noisy ground with bright axis-aligned blocks on
// a cell grid. Low-density blocks are mid-bright, high-density blocks near
// white.
struct SceneStyle {
  int side_px = 64;
  int cell_px = 16;
  std::uint8_t ground = 30;
  std::uint8_t low_density = 150;
  std::uint8_t high_density = 240;
  int noise = 8;  // uniform per-pixel jitter in [-noise, noise]
};

struct Scene {
  RgbImage image;
  annotation::DenseMask labels;
};

// Positive scenes hold at least one block of each debris level.
Scene synthetic_scene(Rng& rng, const SceneStyle& style, bool positive);

struct SyntheticDatasetSpec {
  SceneStyle style;
  int train_event_images = 40;  // split between two training events
  int test_positive = 4;
  int test_negative = 4;
  int annotators = 3;
  int raster_px = 128;  // debris-free regional raster
  std::uint64_t seed = 0;
};

// Writes images/, annotations/<annotator>/, dataset_index.json and a
// georeferenced debris-free raster under raster/. Events are "ian", "ike"
// (training) and "ida" (held out). Annotator disagreement never changes the
// ceiling-of-mean consensus, which equals the drawn labels.
void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetSpec& spec);

// Small-model settings sized for the synthetic dataset: 64 px model input,
// a narrow mock encoder, a tiny decoder, 200 epochs of batch 8 and a 20 %
// validation fraction (32 train / 8 validation images from 40).
PipelineConfig synthetic_pipeline_config(const SyntheticDatasetSpec& spec = {});

}  // namespace debris::cli
