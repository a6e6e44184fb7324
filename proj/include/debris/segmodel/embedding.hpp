#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>

#include "debris/annotation/density.hpp"
#include "debris/common/error.hpp"

namespace debris::segmodel {

inline constexpr int kEmbeddingDim = 512;

// A CLIP-space conditioning vector of exactly kEmbeddingDim finite entries.
class EmbeddingVec {
 public:
  EmbeddingVec() : values_(Eigen::VectorXd::Zero(kEmbeddingDim)) {}
  explicit EmbeddingVec(Eigen::VectorXd values);

  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int i) const { return values_(i); }

  friend bool operator==(const EmbeddingVec& a, const EmbeddingVec& b) { return a.values_ == b.values_; }

 private:
  Eigen::VectorXd values_;
};

// alpha * text + (1 - alpha) * visual. Throws DomainError for alpha outside [0, 1].
EmbeddingVec interpolate_embeddings(const EmbeddingVec& text, const EmbeddingVec& visual, double alpha);

using ConditionMap = std::map<annotation::DensityLevel, EmbeddingVec>;

}  // namespace debris::segmodel
