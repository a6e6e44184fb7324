#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "debris/cli/config.hpp"

namespace debris::cli {

struct CommandOptions {
  bool overwrite = false;       // allow replacing existing outputs
  bool resume = false;          // train: continue from the latest checkpoint
  int stop_after_epoch = 0;     // train: stop early as if interrupted
  std::string raster;           // infer: raster to segment
  std::string split;            // infer: manifest split to segment instead
  std::string checkpoint;       // infer: decoder weights (default checkpoints/best.ckpt)
  std::string predictions_dir;  // evaluate: default masks/predictions/test
  std::string tile_index;       // mosaic: tile index of the predicted tiles
  std::string tile_masks_dir;   // mosaic: default is the index's directory
};

struct CommandResult {
  int exit_code = 0;
  std::string status = "ok";  // ok, partial or failed
  std::string error;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::filesystem::path> inputs;  // hashed into the run manifest
  std::vector<std::filesystem::path> outputs;
  double work_items = 0.0;  // for throughput, in `work_unit`s
  std::string work_unit;
};

CommandResult cmd_tile(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_aggregate(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_engineer(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_train(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_infer(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_mosaic(const PipelineConfig& config, const CommandOptions& options);
CommandResult cmd_evaluate(const PipelineConfig& config, const CommandOptions& options);

// Runs the named command, converting errors into a failed result, and
// writes runs/<command>-<timestamp>.json with the config snapshot, seed,
// code version, input hashes, status, timing, throughput and peak memory.
CommandResult run_command(const std::string& name, const PipelineConfig& config, const CommandOptions& options,
                          const std::vector<std::string>& argv = {});

std::string code_version();

}  // namespace debris::cli
