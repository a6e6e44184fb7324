#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "debris/annotation/manifest.hpp"
#include "debris/annotation/mask.hpp"
#include "debris/common/image.hpp"

namespace debris::promptcraft {

struct PromptParams {
  double brightness_factor = 0.2;
  double blur_sigma_px = 5.0;
  int target_px = 352;
};

struct EngineeredPrompt {
  RgbImage image;
  annotation::DensityLevel level = annotation::DensityLevel::kNoDebris;
  std::string source_image_id;
};

// Keeps pixels whose consensus equals `level` and replaces every other pixel
// by its background-only Gaussian blur scaled by brightness_factor. Returns
// nullopt when the consensus holds no pixel of `level`.
std::optional<EngineeredPrompt> engineer_prompt(const RgbImage& image, const annotation::DenseMask& consensus,
                                                annotation::DensityLevel level, double brightness_factor,
                                                double blur_sigma_px, std::string source_image_id = {});

// P0 holds raw negatives; P1/P2 hold engineered prompts of that level.
struct PromptPool {
  std::array<std::vector<EngineeredPrompt>, annotation::kNumLevels> pools;

  const std::vector<EngineeredPrompt>& operator[](annotation::DensityLevel level) const {
    return pools[annotation::to_int(level)];
  }
  // Throws PreconditionError naming the first empty pool.
  void require_non_empty() const;
};

// Builds pools from the training split only, at params.target_px, ordered by
// image_id. Relative paths in the manifest resolve against base_dir.
PromptPool build_pools(const annotation::DatasetManifest& manifest, const PromptParams& params,
                       const std::filesystem::path& base_dir = {});

// prompts/<level>/<image_id>.png plus prompts/index.json.
void write_pools(const std::filesystem::path& prompts_dir, const PromptPool& pool, const PromptParams& params);
PromptPool read_pools(const std::filesystem::path& prompts_dir, PromptParams* params = nullptr);

std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& path);

}  // namespace debris::promptcraft
