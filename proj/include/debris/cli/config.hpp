#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "debris/segmodel/backend.hpp"
#include "debris/segmodel/decoder.hpp"
#include "debris/trainer/config.hpp"

namespace debris::cli {

// Whole-pipeline settings. Relative paths resolve against base_dir, which is
// the directory of the config file (or the working directory without one).
struct PipelineConfig {
  static constexpr int kSchemaVersion = 1;

  // paths
  std::string raster_dir;         // georeferenced rasters for `tile`
  std::string dataset_index;      // image listing for `aggregate`
  std::string data_root;          // base of the index's relative paths; defaults to the index's directory
  std::string output_root = "out";

  // tiling
  double ground_size_m = 50.0;
  int target_px = 352;

  // promptcraft
  double brightness_factor = 0.2;
  double blur_sigma_px = 5.0;

  // training
  trainer::TrainConfig training;

  // model
  std::string backend = "mock";
  segmodel::MockBackendConfig mock;
  segmodel::DecoderConfig decoder;
  std::uint64_t decoder_seed = 0;
  std::string init_checkpoint;  // optional starting decoder weights

  // evaluation
  std::string held_out_event = "ida";
  double val_fraction = 0.15;

  // runtime
  std::uint64_t seed = 0;
  bool deterministic_mode = true;
  int worker_count = 1;

  std::filesystem::path base_dir;

  // Throws ConfigError for out-of-range values.
  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path output_dir() const { return resolve(output_root); }
};

nlohmann::json config_to_json(const PipelineConfig& config);
// Every key is optional; unknown sections or keys are ConfigErrors.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Applies "section.key=value" overrides to a config document. Values parse
// as JSON when possible and are taken as strings otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
void save_config(const std::filesystem::path& path, const PipelineConfig& config);

// Fixed output layout under output_root.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path tiles() const { return root / "tiles"; }
  std::filesystem::path masks() const { return root / "masks"; }
  std::filesystem::path consensus() const { return masks() / "consensus"; }
  std::filesystem::path manifest() const { return masks() / "manifest.json"; }
  std::filesystem::path predictions(const std::string& split) const { return masks() / "predictions" / split; }
  std::filesystem::path tile_predictions() const { return masks() / "tiles"; }
  std::filesystem::path prompts() const { return root / "prompts"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path best_decoder() const { return checkpoints() / "best.ckpt"; }
  std::filesystem::path mosaics() const { return root / "mosaics"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path runs() const { return root / "runs"; }
};

}  // namespace debris::cli
