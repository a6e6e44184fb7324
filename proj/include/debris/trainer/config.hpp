#pragma once

#include <array>
#include <cstdint>

#include <json.hpp>

#include "debris/annotation/density.hpp"

namespace debris::trainer {

struct TrainConfig {
  int batch_size = 64;
  int epochs = 2000;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // Requested reduced-precision arithmetic. The CPU path always computes in
  // float64; the flag is recorded and reported.
  bool mixed_precision = true;
  bool deterministic = true;
  // Relative sampling weights for levels 0, 1, 2.
  std::array<double, annotation::kNumLevels> level_weights{1.0, 1.0, 1.0};
  int checkpoint_every = 100;

  // Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are ConfigErrors.
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace debris::trainer
