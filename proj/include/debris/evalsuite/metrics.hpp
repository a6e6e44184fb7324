#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "debris/annotation/density.hpp"
#include "debris/annotation/mask.hpp"

namespace debris::evalsuite {

struct ClassCounts {
  std::uint64_t true_positive = 0;
  std::uint64_t false_positive = 0;
  std::uint64_t false_negative = 0;
  std::uint64_t true_negative = 0;

  std::uint64_t total() const { return true_positive + false_positive + false_negative + true_negative; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

// One-vs-rest pixel counts for each label.
struct ConfusionCounts {
  std::array<ClassCounts, annotation::kNumLevels> per_class{};

  const ClassCounts& operator[](int label) const { return per_class.at(label); }
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Throws ShapeError when the masks differ in shape.
ConfusionCounts confusion(const annotation::DenseMask& pred, const annotation::DenseMask& gt);

// A ratio whose denominator may be zero. Vacuous ratios are reported as 1.
struct Score {
  double value = 1.0;
  bool vacuous = false;
};

// Micro-averaged over `classes`: sums of TP/FP/FN are pooled before the
// ratio. Empty class sets and labels outside {0,1,2} are ContractErrors.
Score dice_score(const ConfusionCounts& counts, const std::vector<int>& classes);
Score iou_score(const ConfusionCounts& counts, const std::vector<int>& classes);
Score precision_score(const ConfusionCounts& counts, int label);
Score recall_score(const ConfusionCounts& counts, int label);

double dice(const ConfusionCounts& counts, const std::vector<int>& classes);
double iou(const ConfusionCounts& counts, const std::vector<int>& classes);
double precision(const ConfusionCounts& counts, int label);
double recall(const ConfusionCounts& counts, int label);

}  // namespace debris::evalsuite
