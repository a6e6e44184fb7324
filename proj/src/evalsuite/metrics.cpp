#include "debris/evalsuite/metrics.hpp"

#include <string>

#include "debris/common/error.hpp"

namespace debris::evalsuite {
namespace {

void check_label(int label) {
  if (label < 0 || label >= annotation::kNumLevels)
    throw ContractError("class " + std::to_string(label) + " is not a density label");
}

struct Pooled {
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

Pooled pool(const ConfusionCounts& counts, const std::vector<int>& classes) {
  if (classes.empty()) throw ContractError("metric requested over an empty class set");
  Pooled p;
  for (int label : classes) {
    check_label(label);
    const auto& c = counts.per_class[label];
    p.tp += c.true_positive;
    p.fp += c.false_positive;
    p.fn += c.false_negative;
  }
  return p;
}

Score ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {1.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  for (int k = 0; k < annotation::kNumLevels; ++k) {
    per_class[k].true_positive += other.per_class[k].true_positive;
    per_class[k].false_positive += other.per_class[k].false_positive;
    per_class[k].false_negative += other.per_class[k].false_negative;
    per_class[k].true_negative += other.per_class[k].true_negative;
  }
  return *this;
}

ConfusionCounts confusion(const annotation::DenseMask& pred, const annotation::DenseMask& gt) {
  if (!pred.same_shape(gt)) {
    throw ShapeError("prediction is " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     ", ground truth is " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()));
  }
  // 3x3 joint histogram, then one-vs-rest per label.
  std::array<std::uint64_t, 9> joint{};
  const auto p = pred.grid().values();
  const auto g = gt.grid().values();
  for (std::size_t i = 0; i < p.size(); ++i) ++joint[g[i] * 3 + p[i]];

  const std::uint64_t total = p.size();
  ConfusionCounts out;
  for (int k = 0; k < 3; ++k) {
    std::uint64_t gt_k = 0, pred_k = 0;
    for (int j = 0; j < 3; ++j) {
      gt_k += joint[k * 3 + j];
      pred_k += joint[j * 3 + k];
    }
    auto& c = out.per_class[k];
    c.true_positive = joint[k * 3 + k];
    c.false_negative = gt_k - c.true_positive;
    c.false_positive = pred_k - c.true_positive;
    c.true_negative = total - c.true_positive - c.false_negative - c.false_positive;
  }
  return out;
}

Score dice_score(const ConfusionCounts& counts, const std::vector<int>& classes) {
  const Pooled p = pool(counts, classes);
  return ratio(2 * p.tp, 2 * p.tp + p.fp + p.fn);
}

Score iou_score(const ConfusionCounts& counts, const std::vector<int>& classes) {
  const Pooled p = pool(counts, classes);
  return ratio(p.tp, p.tp + p.fp + p.fn);
}

Score precision_score(const ConfusionCounts& counts, int label) {
  check_label(label);
  const auto& c = counts.per_class[label];
  return ratio(c.true_positive, c.true_positive + c.false_positive);
}

Score recall_score(const ConfusionCounts& counts, int label) {
  check_label(label);
  const auto& c = counts.per_class[label];
  return ratio(c.true_positive, c.true_positive + c.false_negative);
}

double dice(const ConfusionCounts& counts, const std::vector<int>& classes) {
  return dice_score(counts, classes).value;
}
double iou(const ConfusionCounts& counts, const std::vector<int>& classes) {
  return iou_score(counts, classes).value;
}
double precision(const ConfusionCounts& counts, int label) { return precision_score(counts, label).value; }
double recall(const ConfusionCounts& counts, int label) { return recall_score(counts, label).value; }

}  // namespace debris::evalsuite
