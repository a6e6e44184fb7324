#pragma once

#include <string>
#include <vector>

#include "debris/annotation/mask.hpp"
#include "debris/common/grid.hpp"

namespace debris::annotation {

// H x W x N stack of per-annotator masks.
class AnnotationStack {
 public:
  AnnotationStack() = default;

  // Throws ShapeError when the mask differs in shape from earlier slices and
  // ContractError on a repeated annotator id.
  void add(std::string annotator_id, DenseMask mask);

  int size() const { return static_cast<int>(slices_.size()); }
  int rows() const { return slices_.empty() ? 0 : slices_.front().rows(); }
  int cols() const { return slices_.empty() ? 0 : slices_.front().cols(); }
  const std::vector<DenseMask>& slices() const { return slices_; }
  const std::vector<std::string>& annotator_ids() const { return ids_; }

 private:
  std::vector<DenseMask> slices_;
  std::vector<std::string> ids_;
};

// Per pixel: ceil(mean over annotators), with the standard ceiling, so an
// exactly integral mean maps to itself.
DenseMask aggregate_consensus(const AnnotationStack& stack);

// 1 where mask == level.
BinaryMask binarize(const DenseMask& mask, DensityLevel level);

bool classify_positive(const DenseMask& consensus);

bool contains_level(const DenseMask& mask, DensityLevel level);

}  // namespace debris::annotation
