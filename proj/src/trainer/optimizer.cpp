#include "debris/trainer/optimizer.hpp"

#include <cmath>

#include "debris/common/error.hpp"

namespace debris::trainer {

AdamW::AdamW(const std::vector<segmodel::NamedParameter>& params, AdamWParams hp) : hp_(hp) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(segmodel::ag::Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(segmodel::ag::Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

void AdamW::step(std::vector<segmodel::NamedParameter>& params, double lr) {
  if (params.size() != m_.size()) throw ContractError("optimizer built for a different parameter list");
  ++steps_;
  const double bias1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& var = params[i].var;
    const auto& g = var.grad();
    if (g.size() == 0) continue;
    auto& w = var.mutable_value();
    w *= 1.0 - lr * hp_.weight_decay;
    m_[i] = hp_.beta1 * m_[i] + (1.0 - hp_.beta1) * g;
    v_[i] = hp_.beta2 * v_[i] + (1.0 - hp_.beta2) * g.cwiseProduct(g);
    const double step_size = lr / bias1;
    const double sqrt_bias2 = std::sqrt(bias2);
    w.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() / sqrt_bias2 + hp_.eps);
  }
}

}  // namespace debris::trainer
