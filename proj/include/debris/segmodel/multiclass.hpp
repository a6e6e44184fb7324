#pragma once

#include <array>

#include "debris/annotation/mask.hpp"
#include "debris/common/image.hpp"
#include "debris/segmodel/backend.hpp"
#include "debris/segmodel/decoder.hpp"

namespace debris::segmodel {

enum class TieBreak { kLowestLabel, kHighestLabel };

// Per-pixel argmax over the three level maps. Raw logits are compared; a
// monotone squashing could not change the winner.
annotation::DenseMask assemble_multiclass(const std::array<Grid<double>, annotation::kNumLevels>& logits,
                                          TieBreak tie_break = TieBreak::kLowestLabel);

// Scalar form of the same rule, for a single pixel.
annotation::DensityLevel argmax_level(const std::array<double, annotation::kNumLevels>& scores,
                                      TieBreak tie_break = TieBreak::kLowestLabel);

// One decode per level on shared activations, then assemble_multiclass.
// Throws ContractError if `conds` lacks a level.
annotation::DenseMask segment_multiclass(const Decoder& decoder, const EncoderActivations& activations,
                                         const ConditionMap& conds, TieBreak tie_break = TieBreak::kLowestLabel);

annotation::DenseMask segment_multiclass(const Decoder& decoder, const EncoderBackend& backend,
                                         const RgbImage& query, const ConditionMap& conds,
                                         TieBreak tie_break = TieBreak::kLowestLabel);

// Text-only conditioning (alpha = 1) for the three candidate prompts.
ConditionMap text_conditions(const EncoderBackend& backend);

}  // namespace debris::segmodel
