#include "debris/segmodel/multiclass.hpp"

#include <set>
#include <string>

namespace debris::segmodel {

using annotation::DensityLevel;
using annotation::kNumLevels;

DensityLevel argmax_level(const std::array<double, kNumLevels>& scores, TieBreak tie_break) {
  int best = tie_break == TieBreak::kLowestLabel ? 0 : kNumLevels - 1;
  for (int step = 1; step < kNumLevels; ++step) {
    const int l = tie_break == TieBreak::kLowestLabel ? step : kNumLevels - 1 - step;
    if (scores[l] > scores[best]) best = l;
  }
  return static_cast<DensityLevel>(best);
}

annotation::DenseMask assemble_multiclass(const std::array<Grid<double>, kNumLevels>& logits, TieBreak tie_break) {
  const int rows = logits[0].rows(), cols = logits[0].cols();
  for (const auto& m : logits)
    if (m.rows() != rows || m.cols() != cols) throw ShapeError("logit maps differ in shape");
  annotation::DenseMask out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.set(r, c, argmax_level({logits[0](r, c), logits[1](r, c), logits[2](r, c)}, tie_break));
  return out;
}

annotation::DenseMask segment_multiclass(const Decoder& decoder, const EncoderActivations& activations,
                                         const ConditionMap& conds, TieBreak tie_break) {
  std::array<Grid<double>, kNumLevels> maps;
  for (DensityLevel level : annotation::kAllLevels) {
    auto it = conds.find(level);
    if (it == conds.end())
      throw ContractError("no conditional embedding for level " + std::to_string(annotation::to_int(level)));
    maps[annotation::to_int(level)] = decoder.decode(activations, it->second, level).scores;
  }
  return assemble_multiclass(maps, tie_break);
}

annotation::DenseMask segment_multiclass(const Decoder& decoder, const EncoderBackend& backend,
                                         const RgbImage& query, const ConditionMap& conds, TieBreak tie_break) {
  for (DensityLevel level : annotation::kAllLevels)
    if (!conds.contains(level))
      throw ContractError("no conditional embedding for level " + std::to_string(annotation::to_int(level)));
  std::set<int> layers(decoder.config().extract_layers.begin(), decoder.config().extract_layers.end());
  return segment_multiclass(decoder, backend.encode_image(query, layers).activations, conds, tie_break);
}

ConditionMap text_conditions(const EncoderBackend& backend) {
  ConditionMap conds;
  for (DensityLevel level : annotation::kAllLevels)
    conds.emplace(level, backend.encode_text(std::string(annotation::text_prompt(level))));
  return conds;
}

}  // namespace debris::segmodel
