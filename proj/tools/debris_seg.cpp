// debris-seg: command-line front end for the debris segmentation pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "debris/cli/commands.hpp"
#include "debris/cli/config.hpp"
#include "debris/cli/synthetic.hpp"
#include "debris/common/error.hpp"
#include "debris/common/log.hpp"

namespace fs = std::filesystem;
using namespace debris;

namespace {

std::string absolute_string(const std::string& path) { return fs::absolute(path).string(); }

template <typename T>
void push_override(std::vector<std::string>& out, const std::string& key, const std::optional<T>& value) {
  if (!value) return;
  out.push_back(key + "=" + nlohmann::json(*value).dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debris segmentation pipeline: tiling, consensus, prompts, training, inference, evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> output_root;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool verbose = false, quiet = false;
  cli::CommandOptions options;
  app.add_option("-c,--config", config_path, "Pipeline config file (JSON)");
  app.add_option("--set", sets, "Override a config value: section.key=value (repeatable)");
  app.add_option("--output-root", output_root, "Output root directory");
  app.add_option("--seed", seed, "Global seed (runtime.seed)");
  app.add_option("--workers", workers, "Concurrent per-tile/per-image workers");
  app.add_flag("--overwrite", options.overwrite, "Replace existing outputs");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  std::optional<std::string> raster_dir, dataset_index, data_root, held_out;
  std::optional<int> epochs, batch_size;

  auto* tile = app.add_subcommand("tile", "Cut georeferenced rasters into fixed-footprint tiles");
  tile->add_option("--raster-dir", raster_dir, "Directory of georeferenced rasters");

  auto* aggregate = app.add_subcommand("aggregate", "Build consensus masks and the split manifest");
  aggregate->add_option("--dataset-index", dataset_index, "Dataset index JSON");
  aggregate->add_option("--data-root", data_root, "Base directory of the index's relative paths");
  aggregate->add_option("--held-out-event", held_out, "Event reserved for the test split");

  app.add_subcommand("engineer", "Build visual prompt pools from the training split");

  auto* train = app.add_subcommand("train", "Fine-tune the decoder");
  train->add_flag("--resume", options.resume, "Continue from the latest checkpoint");
  train->add_option("--epochs", epochs, "Number of epochs");
  train->add_option("--batch-size", batch_size, "Batch size");
  train->add_option("--stop-after-epoch", options.stop_after_epoch, "Stop after this epoch (simulated interruption)");

  auto* infer = app.add_subcommand("infer", "Segment a raster into a mosaic, or a manifest split");
  auto* raster_opt = infer->add_option("--raster", options.raster, "Georeferenced raster to segment");
  auto* split_opt = infer->add_option("--split", options.split, "Manifest split to segment (train, val, test)");
  raster_opt->excludes(split_opt);
  infer->add_option("--checkpoint", options.checkpoint, "Decoder checkpoint (default checkpoints/best.ckpt)");

  auto* mosaic = app.add_subcommand("mosaic", "Merge per-tile predictions into a mosaic");
  mosaic->add_option("--tile-index", options.tile_index, "Tile index JSON")->required();
  mosaic->add_option("--tile-masks", options.tile_masks_dir, "Directory of <tile_id>.png masks");

  auto* evaluate = app.add_subcommand("evaluate", "Score test predictions against consensus");
  evaluate->add_option("--predictions", options.predictions_dir, "Prediction directory (default masks/predictions/test)");

  std::string synth_out;
  int synth_images = 40;
  auto* synth = app.add_subcommand("synth", "Write the synthetic bright-rectangles dataset and a matching config");
  synth->add_option("--out", synth_out, "Destination directory")->required();
  synth->add_option("--images", synth_images, "Images across the two training events");

  app.add_subcommand("show-config", "Print the effective config");

  CLI11_PARSE(app, argc, argv);
  set_log_level(verbose ? LogLevel::kDebug : quiet ? LogLevel::kWarning : LogLevel::kInfo);

  try {
    if (synth->parsed()) {
      cli::SyntheticDatasetSpec spec;
      spec.train_event_images = synth_images;
      if (seed) spec.seed = *seed;
      const fs::path out = synth_out;
      if (fs::exists(out) && !fs::is_empty(out) && !options.overwrite) {
        std::cerr << out.string() << " is not empty; pass --overwrite to replace it\n";
        return 1;
      }
      cli::write_synthetic_dataset(out, spec);
      cli::save_config(out / "config.json", cli::synthetic_pipeline_config(spec));
      std::cout << "wrote synthetic dataset and " << (out / "config.json").string() << "\n";
      return 0;
    }

    std::vector<std::string> overrides = sets;
    if (output_root) overrides.push_back("paths.output_root=" + nlohmann::json(absolute_string(*output_root)).dump());
    if (raster_dir) overrides.push_back("paths.raster_dir=" + nlohmann::json(absolute_string(*raster_dir)).dump());
    if (dataset_index)
      overrides.push_back("paths.dataset_index=" + nlohmann::json(absolute_string(*dataset_index)).dump());
    if (data_root) overrides.push_back("paths.data_root=" + nlohmann::json(absolute_string(*data_root)).dump());
    push_override(overrides, "evaluation.held_out_event", held_out);
    push_override(overrides, "runtime.seed", seed);
    push_override(overrides, "runtime.worker_count", workers);
    push_override(overrides, "training.epochs", epochs);
    push_override(overrides, "training.batch_size", batch_size);
    if (!options.raster.empty()) options.raster = absolute_string(options.raster);
    if (!options.checkpoint.empty()) options.checkpoint = absolute_string(options.checkpoint);
    if (!options.predictions_dir.empty()) options.predictions_dir = absolute_string(options.predictions_dir);
    if (!options.tile_index.empty()) options.tile_index = absolute_string(options.tile_index);
    if (!options.tile_masks_dir.empty()) options.tile_masks_dir = absolute_string(options.tile_masks_dir);

    const cli::PipelineConfig config = cli::load_config(config_path, overrides);
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "show-config") {
      std::cout << cli::config_to_json(config).dump(2) << "\n";
      return 0;
    }
    const cli::CommandResult result =
        cli::run_command(command, config, options, std::vector<std::string>(argv, argv + argc));
    std::cout << nlohmann::json{{"command", command}, {"status", result.status}, {"summary", result.summary}}.dump(2)
              << "\n";
    if (!result.error.empty()) std::cerr << "error: " << result.error << "\n";
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
