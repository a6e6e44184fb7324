#include "debris/segmodel/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "debris/common/error.hpp"

namespace debris::segmodel::ag {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

Var make(Matrix value, std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (g_grad_enabled && any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void push(const std::shared_ptr<Node>& parent, const Matrix& g) {
  if (parent->requires_grad) parent->accumulate(g);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0)
    grad = g;
  else
    grad += g;
}

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (!root.defined() || root.rows() != 1 || root.cols() != 1)
    throw ShapeError("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul " + shape(a.value()) + " * " + shape(b.value()));
  auto pa = a.node(), pb = b.node();
  return make(a.value() * b.value(), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt " + shape(a.value()) + " * " + shape(b.value()) + "^T");
  auto pa = a.node(), pb = b.node();
  return make(a.value() * b.value().transpose(), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value);
    if (pb->requires_grad) pb->accumulate(self.grad.transpose() * pa->value);
  });
}

Var add(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("add " + shape(a.value()) + " + " + shape(b.value()));
  auto pa = a.node(), pb = b.node();
  return make(a.value() + b.value(), {pa, pb}, [pa, pb](Node& self) {
    push(pa, self.grad);
    push(pb, self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("mul " + shape(a.value()) + " * " + shape(b.value()));
  auto pa = a.node(), pb = b.node();
  return make(a.value().cwiseProduct(b.value()), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row " + shape(a.value()) + " + " + shape(row.value()));
  auto pa = a.node(), pr = row.node();
  Matrix out = a.value();
  out.rowwise() += pr->value.row(0);
  return make(std::move(out), {pa, pr}, [pa, pr](Node& self) {
    push(pa, self.grad);
    if (pr->requires_grad) pr->accumulate(self.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("mul_row " + shape(a.value()) + " * " + shape(row.value()));
  auto pa = a.node(), pr = row.node();
  Matrix out = a.value().array().rowwise() * pr->value.row(0).array();
  return make(std::move(out), {pa, pr}, [pa, pr](Node& self) {
    if (pa->requires_grad) {
      Matrix g = self.grad.array().rowwise() * pr->value.row(0).array();
      pa->accumulate(g);
    }
    if (pr->requires_grad) pr->accumulate(self.grad.cwiseProduct(pa->value).colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  auto pa = a.node();
  return make(a.value() * s, {pa}, [pa, s](Node& self) { push(pa, self.grad * s); });
}

Var relu(const Var& a) {
  auto pa = a.node();
  return make(a.value().cwiseMax(0.0), {pa}, [pa](Node& self) {
    Matrix g = (pa->value.array() > 0.0).select(self.grad, 0.0);
    push(pa, g);
  });
}

Var softmax_rows(const Var& a) {
  auto pa = a.node();
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make(out, {pa}, [pa](Node& self) {
    const Matrix& y = self.value;
    Eigen::VectorXd dots = (self.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.cwiseProduct(self.grad - dots.replicate(1, y.cols()));
    push(pa, g);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
    throw ShapeError("layer_norm parameters do not match feature width");
  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * pg->value.row(0).array();
  out.rowwise() += pb->value.row(0);
  return make(std::move(out), {px, pg, pb}, [px, pg, pb, xhat, inv_std](Node& self) {
    if (pg->requires_grad) pg->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (pb->requires_grad) pb->accumulate(self.grad.colwise().sum());
    if (px->requires_grad) {
      Matrix dxhat = self.grad.array().rowwise() * pg->value.row(0).array();
      Matrix g(dxhat.rows(), dxhat.cols());
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        g.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      px->accumulate(g);
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows out of range");
  auto pa = a.node();
  return make(a.value().middleRows(start, count), {pa}, [pa, start, count](Node& self) {
    if (!pa->requires_grad) return;
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g.middleRows(start, count) = self.grad;
    pa->accumulate(g);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols out of range");
  auto pa = a.node();
  return make(a.value().middleCols(start, count), {pa}, [pa, start, count](Node& self) {
    if (!pa->requires_grad) return;
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g.middleCols(start, count) = self.grad;
    pa->accumulate(g);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Eigen::Index rows = parts.front().rows(), cols = 0;
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols row mismatch");
    cols += p.cols();
    nodes.push_back(p.node());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make(std::move(out), nodes, [nodes](Node& self) {
    Eigen::Index offset = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad) n->accumulate(self.grad.middleCols(offset, n->value.cols()));
      offset += n->value.cols();
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) { return add_row(matmul_nt(x, weight), bias); }

Var im2col3x3(const Var& x, int side) {
  const Eigen::Index channels = x.cols();
  if (x.rows() != static_cast<Eigen::Index>(side) * side) throw ShapeError("im2col3x3 expects side*side rows");
  auto px = x.node();
  Matrix out = Matrix::Zero(x.rows(), channels * 9);
  for (int y = 0; y < side; ++y) {
    for (int xx = 0; xx < side; ++xx) {
      const Eigen::Index row = static_cast<Eigen::Index>(y) * side + xx;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= side) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = xx + kx - 1;
          if (sx < 0 || sx >= side) continue;
          const Eigen::Index src = static_cast<Eigen::Index>(sy) * side + sx;
          for (Eigen::Index c = 0; c < channels; ++c) out(row, c * 9 + ky * 3 + kx) = px->value(src, c);
        }
      }
    }
  }
  return make(std::move(out), {px}, [px, side, channels](Node& self) {
    Matrix g = Matrix::Zero(px->value.rows(), channels);
    for (int y = 0; y < side; ++y) {
      for (int xx = 0; xx < side; ++xx) {
        const Eigen::Index row = static_cast<Eigen::Index>(y) * side + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= side) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= side) continue;
            const Eigen::Index src = static_cast<Eigen::Index>(sy) * side + sx;
            for (Eigen::Index c = 0; c < channels; ++c) g(src, c) += self.grad(row, c * 9 + ky * 3 + kx);
          }
        }
      }
    }
    px->accumulate(g);
  });
}

Var depth_to_space(const Var& x, int side, int k) {
  const Eigen::Index kk = static_cast<Eigen::Index>(k) * k;
  if (x.rows() != static_cast<Eigen::Index>(side) * side || x.cols() % kk != 0)
    throw ShapeError("depth_to_space expects side*side rows and channels*k*k columns");
  const Eigen::Index channels = x.cols() / kk;
  const Eigen::Index out_side = static_cast<Eigen::Index>(side) * k;
  auto px = x.node();
  // Both directions are the same permutation; index[i] maps output entry i
  // (row-major) to its source entry.
  auto index = std::make_shared<std::vector<Eigen::Index>>(static_cast<std::size_t>(out_side * out_side * channels));
  for (Eigen::Index y = 0; y < side; ++y)
    for (Eigen::Index xx = 0; xx < side; ++xx)
      for (Eigen::Index c = 0; c < channels; ++c)
        for (Eigen::Index ky = 0; ky < k; ++ky)
          for (Eigen::Index kx = 0; kx < k; ++kx) {
            const Eigen::Index out_row = (y * k + ky) * out_side + (xx * k + kx);
            const Eigen::Index src_row = y * side + xx;
            const Eigen::Index src_col = c * kk + ky * k + kx;
            (*index)[out_row * channels + c] = src_row * x.cols() + src_col;
          }
  Matrix out(out_side * out_side, channels);
  const double* src = px->value.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < index->size(); ++i) dst[i] = src[(*index)[i]];
  return make(std::move(out), {px}, [px, index](Node& self) {
    Matrix g = Matrix::Zero(px->value.rows(), px->value.cols());
    const double* gs = self.grad.data();
    double* gd = g.data();
    for (std::size_t i = 0; i < index->size(); ++i) gd[(*index)[i]] += gs[i];
    px->accumulate(g);
  });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw ShapeError("bce target " + shape(targets) + " does not match logits " + shape(logits.value()));
  const auto& z = logits.value();
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z.data()[i];
    total += std::max(zi, 0.0) - zi * targets.data()[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  auto pl = logits.node();
  return make(std::move(out), {pl}, [pl, targets, n](Node& self) {
    const double upstream = self.grad(0, 0);
    Matrix g(pl->value.rows(), pl->value.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double zi = pl->value.data()[i];
      const double sigma = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
      g.data()[i] = upstream * (sigma - targets.data()[i]) / n;
    }
    pl->accumulate(g);
  });
}

}  // namespace debris::segmodel::ag
