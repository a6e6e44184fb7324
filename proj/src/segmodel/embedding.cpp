#include "debris/segmodel/embedding.hpp"

#include <cmath>

namespace debris::segmodel {

EmbeddingVec::EmbeddingVec(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() != kEmbeddingDim)
    throw ShapeError("embedding has " + std::to_string(values_.size()) + " entries, expected " +
                     std::to_string(kEmbeddingDim));
  if (!values_.allFinite()) throw DomainError("embedding has non-finite entries");
}

EmbeddingVec interpolate_embeddings(const EmbeddingVec& text, const EmbeddingVec& visual, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (alpha == 1.0) return text;
  if (alpha == 0.0) return visual;
  return EmbeddingVec(alpha * text.values() + (1.0 - alpha) * visual.values());
}

}  // namespace debris::segmodel
