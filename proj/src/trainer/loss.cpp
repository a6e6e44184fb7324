#include "debris/trainer/loss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "debris/common/error.hpp"

namespace debris::trainer {

double bce_loss(std::span<const double> logits, std::span<const std::uint8_t> targets) {
  if (logits.size() != targets.size()) {
    throw ShapeError("bce_loss: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (logits.empty()) throw ShapeError("bce_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = targets[i] ? 1.0 : 0.0;
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return sum / static_cast<double>(logits.size());
}

double bce_loss(const segmodel::LogitMap& logits, const BinaryMask& gt) {
  if (logits.scores.rows() != gt.rows() || logits.scores.cols() != gt.cols()) {
    throw ShapeError("bce_loss: logits " + std::to_string(logits.scores.rows()) + "x" +
                     std::to_string(logits.scores.cols()) + " vs mask " + std::to_string(gt.rows()) + "x" +
                     std::to_string(gt.cols()));
  }
  return bce_loss(logits.scores.values(), gt.values());
}

double cosine_lr(long step, long total_steps, double lr_start, double lr_end) {
  if (total_steps < 1) throw DomainError("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps) {
    throw DomainError("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) +
                      "]");
  }
  if (step == 0) return lr_start;
  if (step == total_steps) return lr_end;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace debris::trainer
