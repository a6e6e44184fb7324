#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices. Enough
// to express the decoder (linear layers, attention, layer norm, the
// transposed-convolution head) and nothing more.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace debris::segmodel::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero-sized until a backward pass reaches this node.
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var parameter(Matrix value);

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates to every
// recorded ancestor. Gradients accumulate into existing leaf grads.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);        // elementwise
Var add_row(const Var& a, const Var& row);  // row (1 x n) broadcast over rows of a
Var mul_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);

// x * W^T + b with PyTorch Linear layout (W: out x in, b: 1 x out).
Var linear(const Var& x, const Var& weight, const Var& bias);

// Feature maps are (side*side) x channels, rows in row-major spatial order.
// 3x3 neighbourhood gather with zero padding; output column order is
// channel*9 + ky*3 + kx, matching a flattened Conv2d weight.
Var im2col3x3(const Var& x, int side);

// Rearranges (side*side) x (channels*k*k), column order channel*k*k + ky*k + kx,
// into ((side*k)*(side*k)) x channels. This is the spatial half of a
// transposed convolution whose kernel equals its stride.
Var depth_to_space(const Var& x, int side, int k);

// Mean binary cross-entropy with logits against 0/1 targets, evaluated as
// max(z,0) - z*y + log1p(exp(-|z|)).
Var bce_with_logits(const Var& logits, const Matrix& targets);

}  // namespace debris::segmodel::ag
