#include "debris/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <regex>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/log.hpp"
#include "debris/evalsuite/metrics.hpp"
#include "debris/segmodel/checkpoint.hpp"
#include "debris/segmodel/multiclass.hpp"
#include "debris/trainer/loss.hpp"
#include "debris/trainer/optimizer.hpp"

namespace debris::trainer {

namespace fs = std::filesystem;
namespace ag = segmodel::ag;
using annotation::DensityLevel;
using nlohmann::json;

namespace {

constexpr const char* kLogName = "train_log.jsonl";
constexpr const char* kBestName = "best.json";

json record_json(const CheckpointRecord& r) {
  return {{"epoch", r.epoch},
          {"val_debris_dice", r.val_debris_dice},
          {"checkpoint_path", r.checkpoint_path},
          {"train_loss", r.train_loss}};
}

CheckpointRecord record_from_json(const json& j) {
  return {j.at("epoch").get<int>(), j.at("val_debris_dice").get<double>(),
          j.at("checkpoint_path").get<std::string>(), j.value("train_loss", 0.0)};
}

struct TrainingState {
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
  std::string rng_state;
  std::vector<CheckpointRecord> records;
  std::optional<CheckpointRecord> best;
};

void save_state(const fs::path& path, const TrainConfig& config, const segmodel::EncoderBackend& backend,
                const segmodel::Decoder& decoder, const AdamW& optimizer, const TrainingState& state) {
  segmodel::CheckpointArchive archive;
  archive.metadata["kind"] = "training_state";
  archive.metadata["train_config"] = config;
  archive.metadata["backend"] = backend.name();
  archive.metadata["backend_fingerprint"] = backend.fingerprint();
  archive.metadata["epoch"] = state.epoch;
  archive.metadata["step"] = state.step;
  archive.metadata["optimizer_steps"] = optimizer.step_count();
  archive.metadata["rng_state"] = state.rng_state;
  json records = json::array();
  for (const auto& r : state.records) records.push_back(record_json(r));
  archive.metadata["records"] = records;
  archive.metadata["best"] = state.best ? record_json(*state.best) : json(nullptr);
  segmodel::add_decoder(archive, decoder);
  const auto& params = decoder.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    archive.tensors.push_back({"adamw.m/" + params[i].name, optimizer.first_moments()[i]});
    archive.tensors.push_back({"adamw.v/" + params[i].name, optimizer.second_moments()[i]});
  }
  segmodel::write_archive(path, archive);
}

TrainingState load_state(const fs::path& path, const TrainConfig& config, const segmodel::EncoderBackend& backend,
                         segmodel::Decoder& decoder, AdamW& optimizer) {
  const auto archive = segmodel::read_archive(path);
  const json& meta = archive.metadata;
  if (meta.value("kind", "") != "training_state")
    throw DecodeError(path.string() + " is not a training-state checkpoint");
  if (meta.at("train_config").get<TrainConfig>() != config)
    throw ConfigError("cannot resume " + path.string() + ": training config differs from the interrupted run");
  if (meta.at("backend_fingerprint").get<std::string>() != backend.fingerprint())
    throw ConfigError("cannot resume " + path.string() + ": encoder backend differs from the interrupted run");
  if (segmodel::config_from_json(meta.at("decoder")) != decoder.config())
    throw ConfigError("cannot resume " + path.string() + ": decoder architecture differs");
  segmodel::load_parameters(decoder, archive);
  const auto& params = decoder.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* m = archive.find("adamw.m/" + params[i].name);
    const auto* v = archive.find("adamw.v/" + params[i].name);
    if (!m || !v) throw DecodeError(path.string() + " lacks optimizer state for '" + params[i].name + "'");
    optimizer.first_moments()[i] = m->value;
    optimizer.second_moments()[i] = v->value;
  }
  optimizer.set_step_count(meta.at("optimizer_steps").get<std::int64_t>());

  TrainingState state;
  state.epoch = meta.at("epoch").get<int>();
  state.step = meta.at("step").get<std::int64_t>();
  state.rng_state = meta.at("rng_state").get<std::string>();
  for (const auto& r : meta.at("records")) state.records.push_back(record_from_json(r));
  if (!meta.at("best").is_null()) state.best = record_from_json(meta.at("best"));
  return state;
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) return std::nullopt;
  static const std::regex pattern(R"(epoch_(\d+)\.ckpt)");
  std::optional<fs::path> best;
  long best_epoch = -1;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const long epoch = std::stol(m[1].str());
    if (epoch > best_epoch) {
      best_epoch = epoch;
      best = entry.path();
    }
  }
  return best;
}

void write_best_marker(const fs::path& dir, const CheckpointRecord& best) {
  write_text_atomic(dir / kBestName, record_json(best).dump(2) + "\n");
}

class LogStream {
 public:
  LogStream(const fs::path& path, bool append) : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw IoError("cannot open training log " + path.string());
  }
  void write(const json& line) {
    out_ << line.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing the training log (disk full?)");
  }

 private:
  std::ofstream out_;
};

}  // namespace

fs::path checkpoint_file(const fs::path& checkpoint_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%06d.ckpt", epoch);
  return checkpoint_dir / name;
}

CheckpointRecord select_checkpoint(std::span<const CheckpointRecord> records) {
  if (records.empty()) throw ContractError("select_checkpoint: no checkpoint records");
  const CheckpointRecord* best = &records.front();
  for (const auto& r : records) {
    if (r.val_debris_dice > best->val_debris_dice ||
        (r.val_debris_dice == best->val_debris_dice && r.epoch < best->epoch)) {
      best = &r;
    }
  }
  return *best;
}

CheckpointRecord read_best_marker(const fs::path& checkpoint_dir) {
  const fs::path path = checkpoint_dir / kBestName;
  if (!fs::exists(path)) throw IoError("no best-checkpoint marker at " + path.string());
  try {
    CheckpointRecord record = record_from_json(json::parse(read_text_file(path)));
    record.checkpoint_path = (checkpoint_dir / record.checkpoint_path).string();
    return record;
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

namespace {

double debris_dice_cached(const segmodel::Decoder& decoder, std::span<const segmodel::EncoderActivations> acts,
                          std::span<const TrainItem> items, const segmodel::ConditionMap& conds) {
  evalsuite::ConfusionCounts total;
  for (std::size_t i = 0; i < items.size(); ++i)
    total += evalsuite::confusion(segmodel::segment_multiclass(decoder, acts[i], conds), items[i].consensus);
  return evalsuite::dice(total, {1, 2});
}

std::vector<segmodel::EncoderActivations> encode_items(const segmodel::EncoderBackend& backend,
                                                       const segmodel::DecoderConfig& dc,
                                                       std::span<const TrainItem> items) {
  const std::set<int> layers(dc.extract_layers.begin(), dc.extract_layers.end());
  std::vector<segmodel::EncoderActivations> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(backend.encode_image(item.image, layers).activations);
  return out;
}

}  // namespace

double debris_dice(const segmodel::Decoder& decoder, const segmodel::EncoderBackend& backend,
                   std::span<const TrainItem> items, const segmodel::ConditionMap& conds) {
  const auto acts = encode_items(backend, decoder.config(), items);
  return debris_dice_cached(decoder, acts, items, conds);
}

std::vector<CheckpointRecord> train(const TrainConfig& config, const TrainData& data,
                                    const promptcraft::PromptPool& pools, const segmodel::EncoderBackend& backend,
                                    segmodel::Decoder& decoder, const TrainRunOptions& options) {
  config.validate();
  if (config.epochs == 0) return {};
  if (data.train.empty()) throw PreconditionError("training split is empty");
  if (data.validation.empty()) throw PreconditionError("validation split is empty");
  pools.require_non_empty();
  if (options.checkpoint_dir.empty()) throw ConfigError("train: checkpoint directory not set");
  if (config.mixed_precision) log_warning("mixed precision requested; the CPU path trains in float64");
  fs::create_directories(options.checkpoint_dir);

  AdamW optimizer(decoder.parameters(),
                  {config.beta1, config.beta2, config.adam_eps, config.weight_decay});
  TrainingState state;
  state.rng_state = Rng(config.seed).serialize();
  bool resumed = false;
  if (options.resume) {
    if (auto latest = latest_checkpoint(options.checkpoint_dir)) {
      state = load_state(*latest, config, backend, decoder, optimizer);
      resumed = true;
      log_info("resuming from " + latest->string() + " after epoch " + std::to_string(state.epoch));
    }
  }
  LogStream log_stream(options.checkpoint_dir / kLogName, resumed);
  if (resumed) log_stream.write({{"event", "resume"}, {"epoch", state.epoch}, {"step", state.step}});

  // Encoder outputs are fixed, so everything the frozen backend contributes
  // is computed once.
  const auto train_acts = encode_items(backend, decoder.config(), data.train);
  const auto val_acts = encode_items(backend, decoder.config(), data.validation);
  const segmodel::ConditionMap text = segmodel::text_conditions(backend);
  std::array<std::vector<segmodel::EmbeddingVec>, annotation::kNumLevels> visual;
  for (DensityLevel level : annotation::kAllLevels)
    for (const auto& prompt : pools[level])
      visual[annotation::to_int(level)].push_back(backend.encode_image(prompt.image, {}).embedding);

  const std::size_t n = data.train.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const long batches_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = batches_per_epoch * config.epochs;
  Rng rng = Rng::deserialize(state.rng_state);

  for (int epoch = state.epoch + 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    double epoch_loss = 0.0;
    double lr = config.lr_start;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * batch;
      const std::size_t end = std::min(n, begin + batch);
      const double inv = 1.0 / static_cast<double>(end - begin);
      lr = cosine_lr(state.step, total_steps, config.lr_start, config.lr_end);
      decoder.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const TrainSample s = draw_sample(data.train, order[i], pools, rng, config.level_weights);
        const auto cond = segmodel::interpolate_embeddings(
            text.at(s.level), visual[annotation::to_int(s.level)][s.visual_prompt_index], s.alpha);
        ag::Matrix target(static_cast<Eigen::Index>(s.gt_binary.size()), 1);
        const auto gt = s.gt_binary.values();
        for (std::size_t k = 0; k < gt.size(); ++k) target(static_cast<Eigen::Index>(k), 0) = gt[k];
        const ag::Var logits = decoder.forward(train_acts[s.query_index], ag::constant(segmodel::embedding_row(cond)));
        const ag::Var loss = ag::bce_with_logits(logits, target);
        const double value = loss.value()(0, 0);
        if (!std::isfinite(value)) {
          char msg[160];
          std::snprintf(msg, sizeof msg, "non-finite loss at epoch %d, batch %ld (step %lld, lr %.6g)", epoch, b,
                        static_cast<long long>(state.step), lr);
          throw TrainingError(msg);
        }
        ag::backward(ag::scale(loss, inv));
        batch_loss += value * inv;
      }
      optimizer.step(decoder.parameters(), lr);
      decoder.zero_grad();
      epoch_loss += batch_loss * static_cast<double>(end - begin);
      log_stream.write({{"epoch", epoch}, {"batch", b}, {"step", state.step}, {"lr", lr}, {"loss", batch_loss}});
      ++state.step;
    }

    CheckpointRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(n);
    record.val_debris_dice = debris_dice_cached(decoder, val_acts, data.validation, text);
    const bool improved = !state.best || record.val_debris_dice > state.best->val_debris_dice;
    const bool persist = improved || epoch % config.checkpoint_every == 0 || epoch == config.epochs;
    // Persisted state names checkpoints relative to checkpoint_dir so runs are
    // byte-identical wherever they live.
    if (persist) record.checkpoint_path = checkpoint_file({}, epoch).string();
    state.records.push_back(record);
    if (improved) state.best = record;
    state.epoch = epoch;
    state.rng_state = rng.serialize();
    if (persist) {
      save_state(options.checkpoint_dir / record.checkpoint_path, config, backend, decoder, optimizer, state);
      if (improved) write_best_marker(options.checkpoint_dir, record);
    }
    log_stream.write({{"epoch", epoch},
                      {"step", state.step},
                      {"lr", lr},
                      {"loss", record.train_loss},
                      {"val_dice", record.val_debris_dice},
                      {"checkpoint", record.checkpoint_path}});
    if (options.stop_after_epoch > 0 && epoch >= options.stop_after_epoch) break;
  }
  std::vector<CheckpointRecord> records = state.records;
  for (auto& r : records)
    if (!r.checkpoint_path.empty()) r.checkpoint_path = (options.checkpoint_dir / r.checkpoint_path).string();
  return records;
}

}  // namespace debris::trainer
