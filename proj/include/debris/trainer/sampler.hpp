#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "debris/annotation/manifest.hpp"
#include "debris/annotation/mask.hpp"
#include "debris/common/grid.hpp"
#include "debris/common/image.hpp"
#include "debris/common/rng.hpp"
#include "debris/promptcraft/prompt.hpp"

namespace debris::trainer {

// A query image and its consensus at model resolution.
struct TrainItem {
  std::string image_id;
  RgbImage image;
  annotation::DenseMask consensus;
};

// Loads one split in image_id order, resized to target_px (bilinear image,
// nearest-neighbour labels). Throws PreconditionError for records without a
// consensus.
std::vector<TrainItem> load_split_items(const annotation::DatasetManifest& manifest, annotation::Split split,
                                        int target_px, const std::filesystem::path& base_dir = {});

struct TrainSample {
  std::size_t query_index = 0;
  std::string query_image_id;
  annotation::DensityLevel level = annotation::DensityLevel::kNoDebris;
  std::string text_prompt;
  std::size_t visual_prompt_index = 0;  // into pools[level]
  std::string visual_prompt_id;
  double alpha = 1.0;
  BinaryMask gt_binary;
};

using LevelWeights = std::array<double, annotation::kNumLevels>;

// Draws level, then a visual prompt from that level's pool (skipping prompts
// made from the query itself unless nothing else is available), then alpha,
// in that order from `rng`.
TrainSample draw_sample(std::span<const TrainItem> items, std::size_t query_index,
                        const promptcraft::PromptPool& pools, Rng& rng, const LevelWeights& weights = {1, 1, 1});

// batch_size samples with queries drawn uniformly from `items`. Throws
// PreconditionError when `items` or any pool is empty.
std::vector<TrainSample> sample_training_batch(std::span<const TrainItem> items,
                                               const promptcraft::PromptPool& pools, Rng& rng, int batch_size,
                                               const LevelWeights& weights = {1, 1, 1});

}  // namespace debris::trainer
