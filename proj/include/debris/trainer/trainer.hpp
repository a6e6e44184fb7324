#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "debris/promptcraft/prompt.hpp"
#include "debris/segmodel/backend.hpp"
#include "debris/segmodel/decoder.hpp"
#include "debris/trainer/config.hpp"
#include "debris/trainer/sampler.hpp"

namespace debris::trainer {

struct CheckpointRecord {
  int epoch = 0;  // 1-based
  double val_debris_dice = 0.0;
  std::string checkpoint_path;  // inside checkpoint_dir; empty when that epoch was not persisted
  double train_loss = 0.0;      // mean sample loss over the epoch

  friend bool operator==(const CheckpointRecord&, const CheckpointRecord&) = default;
};

struct TrainData {
  std::vector<TrainItem> train;
  std::vector<TrainItem> validation;
};

struct TrainRunOptions {
  // Receives epoch_NNNNNN.ckpt files, train_log.jsonl and best.json.
  std::filesystem::path checkpoint_dir;
  // Continue from the latest checkpoint in checkpoint_dir, if any.
  bool resume = false;
  // Return after this epoch as if interrupted; 0 runs to completion.
  int stop_after_epoch = 0;
};

// Fine-tunes `decoder` in place on top of the frozen backend. Each epoch
// visits every training image once in shuffled order with a fresh (level,
// prompt, alpha) draw; gradients are averaged over each batch before an
// AdamW step under a cosine schedule. Validation debris Dice (text prompts
// only) is recorded every epoch. A checkpoint carrying the full training
// state is written when the best score improves, every checkpoint_every
// epochs and after the final epoch.
//
// Throws TrainingError on a non-finite loss and PreconditionError on empty
// splits or pools. With zero epochs nothing is read or written.
std::vector<CheckpointRecord> train(const TrainConfig& config, const TrainData& data,
                                    const promptcraft::PromptPool& pools, const segmodel::EncoderBackend& backend,
                                    segmodel::Decoder& decoder, const TrainRunOptions& options);

// Highest val_debris_dice, earliest epoch on ties. Throws ContractError on
// an empty list.
CheckpointRecord select_checkpoint(std::span<const CheckpointRecord> records);

// Pixel-pooled Dice over classes {1,2} of the three-level segmentation.
double debris_dice(const segmodel::Decoder& decoder, const segmodel::EncoderBackend& backend,
                   std::span<const TrainItem> items, const segmodel::ConditionMap& conds);

// best.json written next to the checkpoints; the path is returned joined to checkpoint_dir.
CheckpointRecord read_best_marker(const std::filesystem::path& checkpoint_dir);

std::filesystem::path checkpoint_file(const std::filesystem::path& checkpoint_dir, int epoch);

}  // namespace debris::trainer
