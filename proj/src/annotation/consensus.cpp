#include "debris/annotation/consensus.hpp"

#include <algorithm>

namespace debris::annotation {

void AnnotationStack::add(std::string annotator_id, DenseMask mask) {
  if (!slices_.empty() && !mask.same_shape(slices_.front())) {
    throw ShapeError("annotation from '" + annotator_id + "' is " + std::to_string(mask.rows()) + "x" +
                     std::to_string(mask.cols()) + ", expected " + std::to_string(rows()) + "x" +
                     std::to_string(cols()));
  }
  if (std::find(ids_.begin(), ids_.end(), annotator_id) != ids_.end())
    throw ContractError("duplicate annotator id '" + annotator_id + "'");
  ids_.push_back(std::move(annotator_id));
  slices_.push_back(std::move(mask));
}

DenseMask aggregate_consensus(const AnnotationStack& stack) {
  const int n = stack.size();
  if (n == 0) throw EmptyInputError("cannot aggregate an empty annotation stack");
  const auto& first = stack.slices().front();
  const std::size_t pixels = first.grid().size();
  std::vector<unsigned> sums(pixels, 0);
  for (const auto& slice : stack.slices()) {
    if (!slice.same_shape(first)) throw ShapeError("annotation stack slices differ in shape");
    const auto values = slice.grid().values();
    for (std::size_t i = 0; i < pixels; ++i) sums[i] += values[i];
  }
  // ceil(sum / n) for non-negative integers.
  std::vector<std::uint8_t> out(pixels);
  const unsigned un = static_cast<unsigned>(n);
  for (std::size_t i = 0; i < pixels; ++i) out[i] = static_cast<std::uint8_t>((sums[i] + un - 1) / un);
  return DenseMask(Grid<std::uint8_t>(first.rows(), first.cols(), std::move(out)));
}

BinaryMask binarize(const DenseMask& mask, DensityLevel level) {
  const auto target = static_cast<std::uint8_t>(level);
  BinaryMask out(mask.rows(), mask.cols(), 0);
  auto src = mask.grid().values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == target ? 1 : 0;
  return out;
}

bool classify_positive(const DenseMask& consensus) {
  const auto v = consensus.grid().values();
  return std::any_of(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; });
}

bool contains_level(const DenseMask& mask, DensityLevel level) {
  const auto v = mask.grid().values();
  const auto target = static_cast<std::uint8_t>(level);
  return std::find(v.begin(), v.end(), target) != v.end();
}

}  // namespace debris::annotation
