#include "debris/promptcraft/prompt.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "debris/annotation/consensus.hpp"
#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/png_io.hpp"
#include "debris/geotile/raster.hpp"
#include "debris/geotile/resample.hpp"
#include "debris/promptcraft/blur.hpp"

namespace debris::promptcraft {

namespace fs = std::filesystem;
using annotation::DensityLevel;

std::optional<EngineeredPrompt> engineer_prompt(const RgbImage& image, const annotation::DenseMask& consensus,
                                                DensityLevel level, double brightness_factor, double blur_sigma_px,
                                                std::string source_image_id) {
  if (image.height() != consensus.rows() || image.width() != consensus.cols()) {
    throw ShapeError("image is " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     " but consensus is " + std::to_string(consensus.rows()) + "x" + std::to_string(consensus.cols()));
  }
  if (level == DensityLevel::kNoDebris)
    throw ContractError("level 0 has no engineered prompts; P0 uses raw negative images");
  if (!(brightness_factor > 0.0 && brightness_factor < 1.0))
    throw DomainError("brightness_factor must lie in (0, 1)");
  if (!(blur_sigma_px > 0.0)) throw DomainError("blur_sigma_px must be positive");

  const BinaryMask foreground = annotation::binarize(consensus, level);
  const auto fg = foreground.values();
  if (std::none_of(fg.begin(), fg.end(), [](std::uint8_t v) { return v != 0; })) return std::nullopt;

  BinaryMask background(foreground.rows(), foreground.cols(), 0);
  for (std::size_t i = 0; i < fg.size(); ++i) background.values()[i] = fg[i] ? 0 : 1;

  const std::vector<double> blurred = masked_gaussian_blur_values(image, background, blur_sigma_px);
  EngineeredPrompt prompt{image, level, std::move(source_image_id)};
  auto out = prompt.image.bytes();
  for (std::size_t p = 0; p < fg.size(); ++p) {
    if (fg[p]) continue;
    for (int ch = 0; ch < 3; ++ch) {
      const double v = brightness_factor * blurred[p * 3 + ch];
      out[p * 3 + ch] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return prompt;
}

void PromptPool::require_non_empty() const {
  for (DensityLevel level : annotation::kAllLevels) {
    if ((*this)[level].empty()) {
      throw PreconditionError("prompt pool P" + std::to_string(annotation::to_int(level)) + " (" +
                              std::string(annotation::level_name(level)) + ") is empty");
    }
  }
}

fs::path resolve_path(const fs::path& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

PromptPool build_pools(const annotation::DatasetManifest& manifest, const PromptParams& params,
                       const fs::path& base_dir) {
  auto train = manifest.in_split(annotation::Split::kTrain);
  std::sort(train.begin(), train.end(), [](auto* a, auto* b) { return a->image_id < b->image_id; });

  PromptPool pool;
  for (const auto* record : train) {
    if (!record->consensus_path)
      throw PreconditionError("training record '" + record->image_id + "' has no consensus annotation");
    const RgbImage raw = geotile::read_rgb_image(resolve_path(base_dir, record->image_path));
    const annotation::DenseMask consensus = annotation::read_mask(resolve_path(base_dir, *record->consensus_path));
    if (consensus.rows() != raw.height() || consensus.cols() != raw.width())
      throw ShapeError("consensus of '" + record->image_id + "' does not match its image");
    const RgbImage image = geotile::resize_for_model(raw, params.target_px);
    const annotation::DenseMask labels = geotile::resize_nearest(consensus, params.target_px, params.target_px);

    if (!annotation::classify_positive(labels)) {
      if (!record->is_positive)
        pool.pools[0].push_back({image, DensityLevel::kNoDebris, record->image_id});
      continue;
    }
    for (DensityLevel level : {DensityLevel::kLowDensity, DensityLevel::kHighDensity}) {
      auto prompt = engineer_prompt(image, labels, level, params.brightness_factor, params.blur_sigma_px,
                                    record->image_id);
      if (prompt) pool.pools[annotation::to_int(level)].push_back(std::move(*prompt));
    }
  }
  pool.require_non_empty();
  return pool;
}

void write_pools(const fs::path& prompts_dir, const PromptPool& pool, const PromptParams& params) {
  nlohmann::json index;
  index["schema_version"] = 1;
  index["params"] = {{"brightness_factor", params.brightness_factor},
                     {"blur_sigma_px", params.blur_sigma_px},
                     {"target_px", params.target_px}};
  index["entries"] = nlohmann::json::array();
  for (DensityLevel level : annotation::kAllLevels) {
    const int l = annotation::to_int(level);
    for (const auto& prompt : pool[level]) {
      const fs::path rel = fs::path(std::to_string(l)) / (prompt.source_image_id + ".png");
      write_png_rgb(prompts_dir / rel, prompt.image);
      index["entries"].push_back({{"level", l}, {"source_image_id", prompt.source_image_id}, {"path", rel.string()}});
    }
  }
  write_text_atomic(prompts_dir / "index.json", index.dump(2) + "\n");
}

PromptPool read_pools(const fs::path& prompts_dir, PromptParams* params) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text_file(prompts_dir / "index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError((prompts_dir / "index.json").string() + ": " + e.what());
  }
  if (params) {
    const auto& p = index.at("params");
    params->brightness_factor = p.at("brightness_factor").get<double>();
    params->blur_sigma_px = p.at("blur_sigma_px").get<double>();
    params->target_px = p.at("target_px").get<int>();
  }
  PromptPool pool;
  for (const auto& e : index.at("entries")) {
    const DensityLevel level = annotation::level_from_int(e.at("level").get<int>());
    pool.pools[annotation::to_int(level)].push_back(
        {read_png_rgb(prompts_dir / e.at("path").get<std::string>()), level, e.at("source_image_id").get<std::string>()});
  }
  return pool;
}

}  // namespace debris::promptcraft
