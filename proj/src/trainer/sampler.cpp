#include "debris/trainer/sampler.hpp"

#include <algorithm>

#include "debris/annotation/consensus.hpp"
#include "debris/common/error.hpp"
#include "debris/geotile/raster.hpp"
#include "debris/geotile/resample.hpp"

namespace debris::trainer {

using annotation::DensityLevel;

std::vector<TrainItem> load_split_items(const annotation::DatasetManifest& manifest, annotation::Split split,
                                        int target_px, const std::filesystem::path& base_dir) {
  auto records = manifest.in_split(split);
  std::sort(records.begin(), records.end(), [](auto* a, auto* b) { return a->image_id < b->image_id; });
  std::vector<TrainItem> items;
  items.reserve(records.size());
  for (const auto* r : records) {
    if (!r->consensus_path)
      throw PreconditionError("record '" + r->image_id + "' has no consensus annotation");
    const RgbImage raw = geotile::read_rgb_image(promptcraft::resolve_path(base_dir, r->image_path));
    const auto consensus = annotation::read_mask(promptcraft::resolve_path(base_dir, *r->consensus_path));
    if (consensus.rows() != raw.height() || consensus.cols() != raw.width())
      throw ShapeError("consensus of '" + r->image_id + "' does not match its image");
    items.push_back({r->image_id, geotile::resize_for_model(raw, target_px),
                     geotile::resize_nearest(consensus, target_px, target_px)});
  }
  return items;
}

TrainSample draw_sample(std::span<const TrainItem> items, std::size_t query_index,
                        const promptcraft::PromptPool& pools, Rng& rng, const LevelWeights& weights) {
  const TrainItem& query = items[query_index];
  const std::vector<double> w(weights.begin(), weights.end());
  const auto level = annotation::level_from_int(static_cast<int>(rng.weighted(w)));
  const auto& pool = pools[level];
  if (pool.empty()) throw PreconditionError("prompt pool for '" + std::string(annotation::level_name(level)) + "' is empty");

  std::vector<std::size_t> eligible;
  eligible.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].source_image_id != query.image_id) eligible.push_back(i);
  std::size_t prompt_index;
  if (eligible.empty()) {
    prompt_index = static_cast<std::size_t>(rng.below(pool.size()));
  } else {
    prompt_index = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
  }
  const double alpha = rng.uniform();

  TrainSample s;
  s.query_index = query_index;
  s.query_image_id = query.image_id;
  s.level = level;
  s.text_prompt = std::string(annotation::text_prompt(level));
  s.visual_prompt_index = prompt_index;
  s.visual_prompt_id = pool[prompt_index].source_image_id;
  s.alpha = alpha;
  s.gt_binary = annotation::binarize(query.consensus, level);
  return s;
}

std::vector<TrainSample> sample_training_batch(std::span<const TrainItem> items,
                                               const promptcraft::PromptPool& pools, Rng& rng, int batch_size,
                                               const LevelWeights& weights) {
  if (items.empty()) throw PreconditionError("training split is empty");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  pools.require_non_empty();
  std::vector<TrainSample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const auto q = static_cast<std::size_t>(rng.below(items.size()));
    batch.push_back(draw_sample(items, q, pools, rng, weights));
  }
  return batch;
}

}  // namespace debris::trainer
