#include "debris/segmodel/decoder.hpp"

#include <cmath>
#include <set>

#include "debris/common/error.hpp"
#include "debris/common/hash.hpp"
#include "debris/common/rng.hpp"

namespace debris::segmodel {

using ag::Matrix;
using ag::Var;

std::string_view head_name(HeadKind head) { return head == HeadKind::kLinear ? "linear" : "refined"; }

HeadKind head_from_name(std::string_view name) {
  if (name == "linear") return HeadKind::kLinear;
  if (name == "refined") return HeadKind::kRefined;
  throw ConfigError("unknown decoder head '" + std::string(name) + "' (expected linear or refined)");
}

void DecoderConfig::validate() const {
  if (token_dim < 1 || n_heads < 1 || token_dim % n_heads != 0)
    throw ConfigError("token_dim must be a positive multiple of n_heads");
  if (ffn_dim < 1 || encoder_width < 1 || cond_dim < 1) throw ConfigError("decoder widths must be positive");
  if (extract_layers.empty()) throw ConfigError("decoder needs at least one encoder layer");
  if (std::set<int>(extract_layers.begin(), extract_layers.end()).size() != extract_layers.size())
    throw ConfigError("extract_layers must be distinct");
  if (cond_layer < 0 || cond_layer >= static_cast<int>(extract_layers.size()))
    throw ConfigError("cond_layer must index one of the decoder blocks");
  if (patch_size < 1) throw ConfigError("patch_size must be positive");
  if (head == HeadKind::kRefined && (patch_size % 4 != 0 || token_dim < 2 || token_dim % 2 != 0))
    throw ConfigError("the refined head needs patch_size divisible by 4 and an even token_dim");
}

namespace {

Matrix uniform(Rng& rng, int rows, int cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

double inv_sqrt(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Var Decoder::add_param(std::string name, Matrix init) {
  Var v = ag::parameter(std::move(init));
  params_.push_back({std::move(name), v});
  return v;
}

Decoder::Decoder(DecoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const int d = config_.token_dim;
  const int n = static_cast<int>(config_.extract_layers.size());
  for (int i = 0; i < n; ++i) {
    const std::string p = "reduces." + std::to_string(i) + ".";
    add_param(p + "weight", uniform(rng, d, config_.encoder_width, inv_sqrt(config_.encoder_width)));
    add_param(p + "bias", uniform(rng, 1, d, inv_sqrt(config_.encoder_width)));
  }
  add_param("film_mul.weight", uniform(rng, d, config_.cond_dim, inv_sqrt(config_.cond_dim)));
  add_param("film_mul.bias", uniform(rng, 1, d, inv_sqrt(config_.cond_dim)));
  add_param("film_add.weight", uniform(rng, d, config_.cond_dim, inv_sqrt(config_.cond_dim)));
  add_param("film_add.bias", uniform(rng, 1, d, inv_sqrt(config_.cond_dim)));
  for (int i = 0; i < n; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    const double xavier = std::sqrt(6.0 / (d + 3 * d));
    add_param(p + "self_attn.in_proj_weight", uniform(rng, 3 * d, d, xavier));
    add_param(p + "self_attn.in_proj_bias", Matrix::Zero(1, 3 * d));
    add_param(p + "self_attn.out_proj.weight", uniform(rng, d, d, inv_sqrt(d)));
    add_param(p + "self_attn.out_proj.bias", Matrix::Zero(1, d));
    add_param(p + "linear1.weight", uniform(rng, config_.ffn_dim, d, inv_sqrt(d)));
    add_param(p + "linear1.bias", uniform(rng, 1, config_.ffn_dim, inv_sqrt(d)));
    add_param(p + "linear2.weight", uniform(rng, d, config_.ffn_dim, inv_sqrt(config_.ffn_dim)));
    add_param(p + "linear2.bias", uniform(rng, 1, d, inv_sqrt(config_.ffn_dim)));
    add_param(p + "norm1.weight", Matrix::Ones(1, d));
    add_param(p + "norm1.bias", Matrix::Zero(1, d));
    add_param(p + "norm2.weight", Matrix::Ones(1, d));
    add_param(p + "norm2.bias", Matrix::Zero(1, d));
  }
  const int ps = config_.patch_size;
  if (config_.head == HeadKind::kLinear) {
    // ConvTranspose2d(d, 1, ps, ps) weight [d, 1, ps, ps] flattened per input channel.
    add_param("trans_conv.weight", uniform(rng, d, ps * ps, inv_sqrt(ps * ps)));
    add_param("trans_conv.bias", uniform(rng, 1, 1, inv_sqrt(ps * ps)));
  } else {
    const int k = ps / 4;
    const int half = d / 2;
    add_param("trans_conv.0.weight", uniform(rng, d, d * 9, inv_sqrt(d * 9)));
    add_param("trans_conv.0.bias", uniform(rng, 1, d, inv_sqrt(d * 9)));
    add_param("trans_conv.2.weight", uniform(rng, d, half * k * k, inv_sqrt(half * k * k)));
    add_param("trans_conv.2.bias", uniform(rng, 1, half, inv_sqrt(half * k * k)));
    add_param("trans_conv.4.weight", uniform(rng, half, k * k, inv_sqrt(k * k)));
    add_param("trans_conv.4.bias", uniform(rng, 1, 1, inv_sqrt(k * k)));
  }
  bind();
}

void Decoder::bind() {
  auto get = [this](const std::string& name) {
    const NamedParameter* p = find(name);
    if (!p) throw ContractError("decoder parameter '" + name + "' missing");
    return p->var;
  };
  const int n = static_cast<int>(config_.extract_layers.size());
  reduce_w_.clear();
  reduce_b_.clear();
  blocks_.clear();
  head_.clear();
  for (int i = 0; i < n; ++i) {
    reduce_w_.push_back(get("reduces." + std::to_string(i) + ".weight"));
    reduce_b_.push_back(get("reduces." + std::to_string(i) + ".bias"));
  }
  film_mul_w_ = get("film_mul.weight");
  film_mul_b_ = get("film_mul.bias");
  film_add_w_ = get("film_add.weight");
  film_add_b_ = get("film_add.bias");
  for (int i = 0; i < n; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    blocks_.push_back({get(p + "self_attn.in_proj_weight"), get(p + "self_attn.in_proj_bias"),
                       get(p + "self_attn.out_proj.weight"), get(p + "self_attn.out_proj.bias"),
                       get(p + "linear1.weight"), get(p + "linear1.bias"), get(p + "linear2.weight"),
                       get(p + "linear2.bias"), get(p + "norm1.weight"), get(p + "norm1.bias"),
                       get(p + "norm2.weight"), get(p + "norm2.bias")});
  }
  if (config_.head == HeadKind::kLinear) {
    head_ = {get("trans_conv.weight"), get("trans_conv.bias")};
  } else {
    head_ = {get("trans_conv.0.weight"), get("trans_conv.0.bias"), get("trans_conv.2.weight"),
             get("trans_conv.2.bias"),   get("trans_conv.4.weight"), get("trans_conv.4.bias")};
  }
}

Decoder Decoder::clone() const {
  Decoder copy;
  copy.config_ = config_;
  for (const auto& p : params_) copy.params_.push_back({p.name, ag::parameter(p.var.value())});
  copy.bind();
  return copy;
}

const NamedParameter* Decoder::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t Decoder::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.var.value().size());
  return total;
}

void Decoder::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::string Decoder::weights_hash() const {
  Sha256 h;
  for (const auto& p : params_) {
    h.update(p.name);
    const Matrix& m = p.var.value();
    h.update_pod(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
  }
  return h.hex_digest();
}

Var Decoder::run_block(const Block& b, const Var& x) const {
  const int d = config_.token_dim;
  const int dh = d / config_.n_heads;
  const Var qkv = ag::linear(x, b.in_w, b.in_b);
  std::vector<Var> heads;
  heads.reserve(config_.n_heads);
  for (int h = 0; h < config_.n_heads; ++h) {
    const Var q = ag::slice_cols(qkv, h * dh, dh);
    const Var k = ag::slice_cols(qkv, d + h * dh, dh);
    const Var v = ag::slice_cols(qkv, 2 * d + h * dh, dh);
    const Var attn = ag::softmax_rows(ag::scale(ag::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh))));
    heads.push_back(ag::matmul(attn, v));
  }
  const Var attended = ag::linear(ag::concat_cols(heads), b.out_w, b.out_b);
  const Var x1 = ag::layer_norm(ag::add(x, attended), b.n1_w, b.n1_b);
  const Var ff = ag::linear(ag::relu(ag::linear(x1, b.l1_w, b.l1_b)), b.l2_w, b.l2_b);
  return ag::layer_norm(ag::add(x1, ff), b.n2_w, b.n2_b);
}

Var Decoder::run_head(const Var& tokens, int side) const {
  const int ps = config_.patch_size;
  if (config_.head == HeadKind::kLinear)
    return ag::add_row(ag::depth_to_space(ag::matmul(tokens, head_[0]), side, ps), head_[1]);
  const int k = ps / 4;
  Var h = ag::relu(ag::linear(ag::im2col3x3(tokens, side), head_[0], head_[1]));
  h = ag::relu(ag::add_row(ag::depth_to_space(ag::matmul(h, head_[2]), side, k), head_[3]));
  return ag::add_row(ag::depth_to_space(ag::matmul(h, head_[4]), side * k, k), head_[5]);
}

Var Decoder::forward(const EncoderActivations& activations, const Var& cond) const {
  if (cond.rows() != 1 || cond.cols() != config_.cond_dim)
    throw ShapeError("conditional embedding must be 1x" + std::to_string(config_.cond_dim));
  if (activations.patch_size != config_.patch_size)
    throw ShapeError("encoder patch size " + std::to_string(activations.patch_size) + " does not match decoder");
  const Eigen::Index tokens = activations.token_count();
  const int n = static_cast<int>(config_.extract_layers.size());
  Var a;
  for (int i = 0; i < n; ++i) {
    const int layer = config_.extract_layers[n - 1 - i];
    auto it = activations.per_layer.find(layer);
    if (it == activations.per_layer.end())
      throw ShapeError("activations for encoder layer " + std::to_string(layer) + " are missing");
    if (it->second.rows() != tokens || it->second.cols() != config_.encoder_width) {
      throw ShapeError("layer " + std::to_string(layer) + " activations are " + std::to_string(it->second.rows()) +
                       "x" + std::to_string(it->second.cols()) + ", expected " + std::to_string(tokens) + "x" +
                       std::to_string(config_.encoder_width));
    }
    const Var reduced = ag::linear(ag::constant(it->second), reduce_w_[i], reduce_b_[i]);
    a = a.defined() ? ag::add(reduced, a) : reduced;
    if (i == config_.cond_layer) {
      const Var gain = ag::linear(cond, film_mul_w_, film_mul_b_);
      const Var shift = ag::linear(cond, film_add_w_, film_add_b_);
      a = ag::add_row(ag::mul_row(a, gain), shift);
    }
    a = run_block(blocks_[i], a);
  }
  return run_head(ag::slice_rows(a, 1, tokens - 1), activations.grid_side);
}

LogitMap Decoder::decode(const EncoderActivations& activations, const EmbeddingVec& cond,
                         annotation::DensityLevel level) const {
  ag::NoGradGuard no_grad;
  const Var out = forward(activations, ag::constant(embedding_row(cond)));
  const int side = activations.grid_side * activations.patch_size;
  return {logits_to_grid(out.value(), side, side), level};
}

Matrix embedding_row(const EmbeddingVec& e) { return e.values().transpose(); }

Grid<double> logits_to_grid(const Matrix& column, int rows, int cols) {
  if (column.size() != static_cast<Eigen::Index>(rows) * cols) throw ShapeError("logit count does not match map size");
  return Grid<double>(rows, cols, std::vector<double>(column.data(), column.data() + column.size()));
}

}  // namespace debris::segmodel
