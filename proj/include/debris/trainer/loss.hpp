#pragma once

#include <span>

#include "debris/common/grid.hpp"
#include "debris/segmodel/decoder.hpp"

namespace debris::trainer {

// Mean binary cross-entropy of logits against 0/1 targets in the stable form
// max(z,0) - z*y + log1p(exp(-|z|)). Throws ShapeError on a shape mismatch.
double bce_loss(const segmodel::LogitMap& logits, const BinaryMask& gt);
double bce_loss(std::span<const double> logits, std::span<const std::uint8_t> targets);

// Cosine decay without warmup:
// lr_end + 0.5 (lr_start - lr_end)(1 + cos(pi step / total_steps)).
// Throws DomainError unless 0 <= step <= total_steps and total_steps >= 1.
double cosine_lr(long step, long total_steps, double lr_start, double lr_end);

}  // namespace debris::trainer
