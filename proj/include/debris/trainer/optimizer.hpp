#pragma once

#include <cstdint>
#include <vector>

#include "debris/segmodel/decoder.hpp"

namespace debris::trainer {

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Adam with decoupled weight decay. Moment buffers follow the order of the
// parameter list passed to the constructor.
class AdamW {
 public:
  AdamW(const std::vector<segmodel::NamedParameter>& params, AdamWParams hp);

  // One update from the accumulated gradients. Parameters whose gradient
  // was never populated are left untouched.
  void step(std::vector<segmodel::NamedParameter>& params, double lr);

  std::int64_t step_count() const { return steps_; }
  void set_step_count(std::int64_t steps) { steps_ = steps; }
  std::vector<segmodel::ag::Matrix>& first_moments() { return m_; }
  std::vector<segmodel::ag::Matrix>& second_moments() { return v_; }
  const std::vector<segmodel::ag::Matrix>& first_moments() const { return m_; }
  const std::vector<segmodel::ag::Matrix>& second_moments() const { return v_; }

 private:
  AdamWParams hp_;
  std::int64_t steps_ = 0;
  std::vector<segmodel::ag::Matrix> m_, v_;
};

}  // namespace debris::trainer
