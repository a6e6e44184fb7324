#include "debris/cli/commands.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <set>

#include "debris/annotation/consensus.hpp"
#include "debris/annotation/manifest.hpp"
#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/hash.hpp"
#include "debris/common/log.hpp"
#include "debris/common/parallel.hpp"
#include "debris/common/png_io.hpp"
#include "debris/evalsuite/report.hpp"
#include "debris/geotile/mosaic.hpp"
#include "debris/geotile/raster.hpp"
#include "debris/geotile/resample.hpp"
#include "debris/geotile/tile_index.hpp"
#include "debris/geotile/tiling.hpp"
#include "debris/promptcraft/prompt.hpp"
#include "debris/segmodel/checkpoint.hpp"
#include "debris/segmodel/multiclass.hpp"
#include "debris/trainer/trainer.hpp"

#ifndef DEBRIS_GIT_DESCRIBE
#define DEBRIS_GIT_DESCRIBE "unknown"
#endif

namespace debris::cli {

namespace fs = std::filesystem;
using annotation::DatasetManifest;
using annotation::Split;
using nlohmann::json;

std::string code_version() { return DEBRIS_GIT_DESCRIBE; }

namespace {

bool has_entries(const fs::path& dir) { return fs::is_directory(dir) && !fs::is_empty(dir); }

// Refuses to touch existing output unless overwrite is set, in which case
// the old content is removed first.
void prepare_output_dir(const fs::path& dir, bool overwrite) {
  if (has_entries(dir)) {
    if (!overwrite) throw ContractError(dir.string() + " already holds output; pass --overwrite to replace it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void prepare_output_file(const fs::path& file, bool overwrite) {
  if (fs::exists(file) && !overwrite)
    throw ContractError(file.string() + " already exists; pass --overwrite to replace it");
  fs::create_directories(file.parent_path());
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

bool is_raster_file(const fs::path& p) {
  static const std::set<std::string> exts = {".png", ".tif", ".tiff", ".jpg", ".jpeg"};
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return exts.count(ext) > 0;
}

DatasetManifest load_manifest(const OutputLayout& layout) {
  if (!fs::exists(layout.manifest()))
    throw PreconditionError("no dataset manifest at " + layout.manifest().string() + "; run `aggregate` first");
  return annotation::read_manifest(layout.manifest());
}

std::unique_ptr<segmodel::EncoderBackend> load_backend(const PipelineConfig& config) {
  return segmodel::make_backend(config.backend, config.mock);
}

void check_compatible(const segmodel::Decoder& decoder, const segmodel::EncoderBackend& backend) {
  const auto& dc = decoder.config();
  if (dc.encoder_width != backend.width() || dc.patch_size != backend.patch_size())
    throw ConfigError("decoder was built for a different encoder (width or patch size differs)");
  for (int layer : dc.extract_layers)
    if (layer < 1 || layer > backend.num_layers())
      throw ConfigError("decoder reads encoder layer " + std::to_string(layer) + ", which the backend lacks");
}

// Segments one image of any size: bilinear resize to the model input, three
// text-conditioned decodes, nearest-neighbour labels back to the input size.
annotation::DenseMask segment_image(const segmodel::Decoder& decoder, const segmodel::EncoderBackend& backend,
                                    const segmodel::ConditionMap& conds, const RgbImage& image, int target_px) {
  const RgbImage input = geotile::resize_for_model(image, target_px);
  const annotation::DenseMask labels = segmodel::segment_multiclass(decoder, backend, input, conds);
  return geotile::resize_nearest(labels, image.height(), image.width());
}

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

}  // namespace

CommandResult cmd_tile(const PipelineConfig& config, const CommandOptions& options) {
  if (config.raster_dir.empty()) throw ConfigError("paths.raster_dir is not set");
  const fs::path raster_dir = config.resolve(config.raster_dir);
  if (!fs::is_directory(raster_dir)) throw IoError("raster directory " + raster_dir.string() + " does not exist");
  std::vector<fs::path> rasters;
  for (const auto& e : fs::directory_iterator(raster_dir))
    if (e.is_regular_file() && is_raster_file(e.path())) rasters.push_back(e.path());
  std::sort(rasters.begin(), rasters.end());
  if (rasters.empty()) throw EmptyInputError("no rasters found in " + raster_dir.string());

  const OutputLayout layout{config.output_dir()};
  prepare_output_dir(layout.tiles(), options.overwrite);

  CommandResult result;
  result.work_unit = "tiles";
  std::vector<std::string> failed;
  json per_raster = json::array();
  for (const auto& path : rasters) {
    result.inputs.push_back(path);
    try {
      const geotile::GeoRaster raster = geotile::load_raster(path);
      result.inputs.push_back(geotile::world_file_path_for(path));
      const std::string stem = path.stem().string();
      geotile::TileIndex index;
      index.source = path.string();
      index.frame = raster.frame();
      index.ground_size_m = config.ground_size_m;
      index.tiles = geotile::plan_tiles(raster, config.ground_size_m, stem);
      const fs::path dir = layout.tiles() / stem;
      fs::create_directories(dir);
      for (const auto& tile : index.tiles) {
        const std::string name = tile.tile_id + ".png";
        write_png_rgb(dir / name, geotile::extract_tile(raster, tile));
        index.tile_paths.push_back(name);
      }
      geotile::write_tile_index(dir / "index.json", index);
      result.outputs.push_back(dir / "index.json");
      result.work_items += static_cast<double>(index.tiles.size());
      per_raster.push_back({{"raster", path.string()},
                            {"tiles", index.tiles.size()},
                            {"tile_side_px", geotile::tile_side_px(raster.gsd_m(), config.ground_size_m)}});
      log_info("tiled " + path.string() + " into " + std::to_string(index.tiles.size()) + " tiles");
    } catch (const Error& e) {
      log_error(path.string() + ": " + e.what());
      failed.push_back(path.filename().string());
    }
  }
  result.summary = {{"rasters", per_raster}, {"failed", failed}};
  if (!failed.empty()) {
    result.exit_code = 1;
    result.status = failed.size() == rasters.size() ? "failed" : "partial";
    result.error = "tiling failed for: " + join(failed);
  }
  return result;
}

CommandResult cmd_aggregate(const PipelineConfig& config, const CommandOptions& options) {
  if (config.dataset_index.empty()) throw ConfigError("paths.dataset_index is not set");
  const fs::path index_path = config.resolve(config.dataset_index);
  const fs::path data_root =
      config.data_root.empty() ? fs::absolute(index_path).parent_path() : config.resolve(config.data_root);
  std::vector<annotation::DatasetRecord> records = annotation::read_dataset_index(index_path);

  const OutputLayout layout{config.output_dir()};
  prepare_output_dir(layout.consensus(), options.overwrite);
  prepare_output_file(layout.manifest(), options.overwrite);
  const fs::path manifest_dir = fs::absolute(layout.manifest()).parent_path();

  CommandResult result;
  result.work_unit = "images";
  result.inputs.push_back(index_path);
  std::vector<annotation::DatasetRecord> kept;
  std::vector<std::string> skipped;
  for (auto& record : records) {
    if (record.annotation_paths.empty()) {
      skipped.push_back(record.image_id);
      continue;
    }
    annotation::AnnotationStack stack;
    std::vector<std::string> rebased;
    for (std::size_t a = 0; a < record.annotation_paths.size(); ++a) {
      const fs::path p = promptcraft::resolve_path(data_root, record.annotation_paths[a]);
      result.inputs.push_back(p);
      stack.add("annotator" + std::to_string(a), annotation::read_mask(p));
      rebased.push_back(fs::relative(fs::absolute(p), manifest_dir).generic_string());
    }
    const annotation::DenseMask consensus = annotation::aggregate_consensus(stack);
    const fs::path out = layout.consensus() / (record.image_id + ".png");
    annotation::write_mask(out, consensus);
    const fs::path image = promptcraft::resolve_path(data_root, record.image_path);
    record.image_path = fs::relative(fs::absolute(image), manifest_dir).generic_string();
    record.annotation_paths = rebased;
    record.consensus_path = fs::relative(fs::absolute(out), manifest_dir).generic_string();
    record.is_positive = annotation::classify_positive(consensus);
    kept.push_back(std::move(record));
    result.work_items += 1;
  }
  if (kept.empty()) throw EmptyInputError("no annotated images in " + index_path.string());

  const DatasetManifest manifest =
      annotation::split_by_event(std::move(kept), config.held_out_event, config.val_fraction, config.seed);
  annotation::write_manifest(layout.manifest(), manifest);
  result.outputs.push_back(layout.manifest());
  const annotation::BalanceReport balance = annotation::class_balance_report(manifest);
  const std::string balance_text = annotation::format_balance_report(balance);
  fs::create_directories(layout.reports());
  write_text_atomic(layout.reports() / "class_balance.txt", balance_text);
  log_info(balance_text);

  result.summary = {{"images", manifest.records.size()},
                    {"skipped_without_annotations", skipped},
                    {"test_positive", balance.test_positive()},
                    {"test_negative", balance.test_negative()}};
  if (!skipped.empty()) {
    result.exit_code = 1;
    result.status = "partial";
    result.error = "images with no annotations: " + join(skipped);
  }
  return result;
}

CommandResult cmd_engineer(const PipelineConfig& config, const CommandOptions& options) {
  const OutputLayout layout{config.output_dir()};
  const DatasetManifest manifest = load_manifest(layout);
  const promptcraft::PromptParams params{config.brightness_factor, config.blur_sigma_px, config.target_px};
  const promptcraft::PromptPool pools =
      promptcraft::build_pools(manifest, params, fs::absolute(layout.manifest()).parent_path());
  prepare_output_dir(layout.prompts(), options.overwrite);
  promptcraft::write_pools(layout.prompts(), pools, params);

  CommandResult result;
  result.inputs.push_back(layout.manifest());
  result.outputs.push_back(layout.prompts() / "index.json");
  result.work_unit = "prompts";
  json sizes = json::object();
  for (annotation::DensityLevel level : annotation::kAllLevels) {
    sizes[std::to_string(annotation::to_int(level))] = pools[level].size();
    result.work_items += static_cast<double>(pools[level].size());
  }
  result.summary = {{"pool_sizes", sizes}};
  return result;
}

CommandResult cmd_train(const PipelineConfig& config, const CommandOptions& options) {
  const OutputLayout layout{config.output_dir()};
  const DatasetManifest manifest = load_manifest(layout);
  const fs::path manifest_dir = fs::absolute(layout.manifest()).parent_path();
  promptcraft::PromptParams params;
  const promptcraft::PromptPool pools = promptcraft::read_pools(layout.prompts(), &params);
  if (params.target_px != config.target_px)
    throw ConfigError("prompt pools were built at " + std::to_string(params.target_px) +
                      " px but tiling.target_px is " + std::to_string(config.target_px) + "; rerun `engineer`");

  if (!options.resume) prepare_output_dir(layout.checkpoints(), options.overwrite);
  fs::create_directories(layout.checkpoints());

  trainer::TrainData data;
  data.train = trainer::load_split_items(manifest, Split::kTrain, config.target_px, manifest_dir);
  data.validation = trainer::load_split_items(manifest, Split::kValidation, config.target_px, manifest_dir);

  const auto backend = load_backend(config);
  segmodel::Decoder decoder = config.init_checkpoint.empty()
                                  ? segmodel::Decoder(config.decoder, config.decoder_seed)
                                  : segmodel::load_decoder(config.resolve(config.init_checkpoint));
  check_compatible(decoder, *backend);

  trainer::TrainConfig tc = config.training;
  tc.deterministic = tc.deterministic && config.deterministic_mode;
  const std::string encoder_before = backend->fingerprint();
  const auto records = trainer::train(tc, data, pools, *backend, decoder,
                                      {layout.checkpoints(), options.resume, options.stop_after_epoch});
  const std::string encoder_after = backend->fingerprint();
  if (encoder_before != encoder_after) throw TrainingError("encoder weights changed during training");

  CommandResult result;
  result.inputs.push_back(layout.manifest());
  result.inputs.push_back(layout.prompts() / "index.json");
  if (!config.init_checkpoint.empty()) result.inputs.push_back(config.resolve(config.init_checkpoint));
  result.work_unit = "epochs";
  result.work_items = static_cast<double>(records.size());

  json recs = json::array();
  for (const auto& r : records)
    recs.push_back({{"epoch", r.epoch}, {"val_debris_dice", r.val_debris_dice}, {"train_loss", r.train_loss},
                    {"checkpoint", r.checkpoint_path.empty() ? "" : fs::path(r.checkpoint_path).filename().string()}});
  write_text_atomic(layout.checkpoints() / "records.json", recs.dump(2) + "\n");
  result.summary = {{"epochs_run", records.size()}, {"encoder_fingerprint", encoder_after}};

  const bool finished = !records.empty() && records.back().epoch == tc.epochs;
  if (!records.empty()) {
    const trainer::CheckpointRecord best = trainer::select_checkpoint(records);
    const segmodel::Decoder best_decoder = segmodel::decoder_from_archive(segmodel::read_archive(best.checkpoint_path));
    segmodel::save_decoder(layout.best_decoder(), best_decoder);
    result.outputs.push_back(layout.best_decoder());
    result.summary["best_epoch"] = best.epoch;
    result.summary["best_val_debris_dice"] = best.val_debris_dice;
    const auto conds = segmodel::text_conditions(*backend);
    result.summary["best_train_debris_dice"] = trainer::debris_dice(best_decoder, *backend, data.train, conds);
    result.summary["final_train_debris_dice"] = trainer::debris_dice(decoder, *backend, data.train, conds);
  }
  if (!finished && tc.epochs > 0) {
    result.status = "partial";
    result.summary["interrupted"] = true;
  }
  return result;
}

CommandResult cmd_infer(const PipelineConfig& config, const CommandOptions& options) {
  if (options.raster.empty() == options.split.empty())
    throw ConfigError("infer needs exactly one of --raster or --split");
  const OutputLayout layout{config.output_dir()};
  const fs::path checkpoint =
      options.checkpoint.empty() ? layout.best_decoder() : fs::path(options.checkpoint);
  if (!fs::exists(checkpoint)) throw PreconditionError("no decoder checkpoint at " + checkpoint.string());
  const segmodel::Decoder decoder = segmodel::load_decoder(checkpoint);
  const auto backend = load_backend(config);
  check_compatible(decoder, *backend);
  fs::create_directories(layout.checkpoints());
  const segmodel::ConditionMap conds =
      segmodel::cached_text_conditions(layout.checkpoints() / "text_conditions.json", *backend);

  CommandResult result;
  result.inputs.push_back(checkpoint);
  const auto t0 = std::chrono::steady_clock::now();

  if (!options.raster.empty()) {
    const fs::path raster_path = options.raster;
    const std::string stem = raster_path.stem().string();
    const fs::path mosaic_path = layout.mosaics() / (stem + ".png");
    prepare_output_file(mosaic_path, options.overwrite);
    const geotile::GeoRaster raster = geotile::load_raster(raster_path);
    result.inputs.push_back(raster_path);
    result.inputs.push_back(geotile::world_file_path_for(raster_path));

    geotile::TileIndex index;
    index.source = raster_path.string();
    index.frame = raster.frame();
    index.ground_size_m = config.ground_size_m;
    index.tiles = geotile::plan_tiles(raster, config.ground_size_m, stem);
    std::vector<geotile::TilePrediction> predictions(index.tiles.size());
    parallel_for(index.tiles.size(), config.worker_count, [&](std::size_t i) {
      const RgbImage crop = geotile::extract_tile(raster, index.tiles[i]);
      predictions[i] = {index.tiles[i], segment_image(decoder, *backend, conds, crop, config.target_px)};
    });
    const fs::path tile_dir = layout.tile_predictions() / stem;
    prepare_output_dir(tile_dir, options.overwrite);
    for (const auto& p : predictions) {
      const std::string name = p.tile.tile_id + ".png";
      annotation::write_mask(tile_dir / name, p.mask);
      index.tile_paths.push_back(name);
    }
    geotile::write_tile_index(tile_dir / "index.json", index);
    const geotile::Mosaic mosaic = geotile::merge_mosaic(raster.frame(), predictions);
    geotile::write_mosaic(mosaic_path, mosaic);
    result.outputs = {mosaic_path, geotile::world_file_path_for(mosaic_path), geotile::provenance_path_for(mosaic_path),
                      tile_dir / "index.json"};
    result.work_unit = "tiles";
    result.work_items = static_cast<double>(predictions.size());
    std::size_t debris_px = 0;
    for (auto v : mosaic.labels.grid().values()) debris_px += v != 0;
    result.summary = {{"mosaic", mosaic_path.string()},
                      {"tiles", predictions.size()},
                      {"height_px", mosaic.labels.rows()},
                      {"width_px", mosaic.labels.cols()},
                      {"debris_pixels", debris_px}};
  } else {
    const Split split = annotation::split_from_name(options.split);
    const DatasetManifest manifest = load_manifest(layout);
    const fs::path manifest_dir = fs::absolute(layout.manifest()).parent_path();
    const fs::path out_dir = layout.predictions(options.split);
    prepare_output_dir(out_dir, options.overwrite);
    const auto records = manifest.in_split(split);
    parallel_for(records.size(), config.worker_count, [&](std::size_t i) {
      const RgbImage image = geotile::read_rgb_image(promptcraft::resolve_path(manifest_dir, records[i]->image_path));
      annotation::write_mask(out_dir / (records[i]->image_id + ".png"),
                             segment_image(decoder, *backend, conds, image, config.target_px));
    });
    result.inputs.push_back(layout.manifest());
    result.outputs.push_back(out_dir);
    result.work_unit = "images";
    result.work_items = static_cast<double>(records.size());
    result.summary = {{"split", options.split}, {"images", records.size()}, {"predictions_dir", out_dir.string()}};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.summary["inference_seconds"] = seconds;
  return result;
}

CommandResult cmd_mosaic(const PipelineConfig& config, const CommandOptions& options) {
  if (options.tile_index.empty()) throw ConfigError("mosaic needs --tile-index");
  const fs::path index_path = options.tile_index;
  const geotile::TileIndex index = geotile::read_tile_index(index_path);
  const fs::path masks_dir =
      options.tile_masks_dir.empty() ? fs::absolute(index_path).parent_path() : fs::path(options.tile_masks_dir);
  std::vector<geotile::TilePrediction> predictions;
  std::vector<std::string> missing;
  CommandResult result;
  result.inputs.push_back(index_path);
  for (const auto& tile : index.tiles) {
    const fs::path p = masks_dir / (tile.tile_id + ".png");
    if (!fs::exists(p)) {
      missing.push_back(tile.tile_id);
      continue;
    }
    result.inputs.push_back(p);
    predictions.push_back({tile, annotation::read_mask(p)});
  }
  if (!missing.empty()) throw IncompleteError("missing tile predictions: " + join(missing));

  const OutputLayout layout{config.output_dir()};
  const fs::path mosaic_path = layout.mosaics() / (fs::path(index.source).stem().string() + ".png");
  prepare_output_file(mosaic_path, options.overwrite);
  const geotile::Mosaic mosaic = geotile::merge_mosaic(index.frame, predictions);
  geotile::write_mosaic(mosaic_path, mosaic);
  result.outputs = {mosaic_path, geotile::world_file_path_for(mosaic_path), geotile::provenance_path_for(mosaic_path)};
  result.work_unit = "tiles";
  result.work_items = static_cast<double>(predictions.size());
  result.summary = {{"mosaic", mosaic_path.string()}, {"tiles", predictions.size()}};
  return result;
}

CommandResult cmd_evaluate(const PipelineConfig& config, const CommandOptions& options) {
  const OutputLayout layout{config.output_dir()};
  const DatasetManifest manifest = load_manifest(layout);
  const fs::path pred_dir =
      options.predictions_dir.empty() ? layout.predictions("test") : fs::path(options.predictions_dir);
  const evalsuite::MaskMap predictions = evalsuite::read_predictions(pred_dir, manifest);
  prepare_output_file(layout.reports() / "metrics.json", options.overwrite);
  const evalsuite::MetricsReport report =
      evalsuite::evaluate_test_set(manifest, predictions, fs::absolute(layout.manifest()).parent_path());
  evalsuite::write_report(layout.reports(), report);
  log_info("\n" + evalsuite::format_report_table(report));

  CommandResult result;
  result.inputs.push_back(layout.manifest());
  for (const auto& [id, mask] : predictions) result.inputs.push_back(pred_dir / (id + ".png"));
  result.outputs = {layout.reports() / "metrics.json", layout.reports() / "metrics.txt"};
  result.work_unit = "images";
  result.work_items = static_cast<double>(predictions.size());
  result.summary = evalsuite::report_to_json(report);
  return result;
}

CommandResult run_command(const std::string& name, const PipelineConfig& config, const CommandOptions& options,
                          const std::vector<std::string>& argv) {
  using Fn = CommandResult (*)(const PipelineConfig&, const CommandOptions&);
  static const std::map<std::string, Fn> commands = {
      {"tile", cmd_tile},   {"aggregate", cmd_aggregate}, {"engineer", cmd_engineer}, {"train", cmd_train},
      {"infer", cmd_infer}, {"mosaic", cmd_mosaic},       {"evaluate", cmd_evaluate}};
  const auto it = commands.find(name);
  if (it == commands.end()) throw ConfigError("unknown command '" + name + "'");

  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_stamp();
  CommandResult result;
  try {
    result = it->second(config, options);
  } catch (const std::exception& e) {
    result = CommandResult{};
    result.exit_code = 1;
    result.status = "failed";
    result.error = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!result.error.empty()) log_error(name + ": " + result.error);

  json inputs = json::array();
  for (const auto& p : result.inputs) {
    if (fs::is_regular_file(p)) inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }
  json outputs = json::array();
  for (const auto& p : result.outputs) outputs.push_back(p.string());
  json manifest = {{"command", name},
                   {"argv", argv},
                   {"started_utc", started},
                   {"status", result.status},
                   {"exit_code", result.exit_code},
                   {"error", result.error},
                   {"code_version", code_version()},
                   {"seed", config.seed},
                   {"deterministic_mode", config.deterministic_mode},
                   {"worker_count", config.worker_count},
                   {"config", config_to_json(config)},
                   {"inputs", inputs},
                   {"outputs", outputs},
                   {"summary", result.summary},
                   {"wall_seconds", seconds},
                   {"peak_rss_kb", peak_rss_kb()}};
  if (!result.work_unit.empty()) {
    manifest["throughput"] = {{"items", result.work_items},
                              {"unit", result.work_unit},
                              {"per_second", seconds > 0 ? result.work_items / seconds : 0.0}};
  }
  try {
    const fs::path runs = OutputLayout{config.output_dir()}.runs();
    fs::create_directories(runs);
    fs::path path = runs / (name + "-" + started + ".json");
    for (int n = 1; fs::exists(path); ++n) path = runs / (name + "-" + started + "-" + std::to_string(n) + ".json");
    write_text_atomic(path, manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    log_error(std::string("could not write run manifest: ") + e.what());
    if (result.exit_code == 0) {
      result.exit_code = 1;
      result.status = "failed";
      result.error = e.what();
    }
  }
  return result;
}

}  // namespace debris::cli
