#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "debris/annotation/density.hpp"
#include "debris/common/grid.hpp"
#include "debris/segmodel/autograd.hpp"
#include "debris/segmodel/backend.hpp"
#include "debris/segmodel/embedding.hpp"

namespace debris::segmodel {

enum class HeadKind {
  kLinear,   // one transposed convolution, kernel = stride = patch size
  kRefined,  // conv3x3 + ReLU + two transposed convolutions (kernel = stride = patch/4)
};

std::string_view head_name(HeadKind head);
HeadKind head_from_name(std::string_view name);

struct DecoderConfig {
  int token_dim = 64;
  int n_heads = 4;
  int ffn_dim = 2048;
  std::vector<int> extract_layers = {3, 7, 9};
  int encoder_width = 768;
  int cond_dim = kEmbeddingDim;
  int patch_size = 16;
  int cond_layer = 0;
  HeadKind head = HeadKind::kRefined;

  // Throws ConfigError on inconsistent dimensions.
  void validate() const;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

struct LogitMap {
  Grid<double> scores;
  annotation::DensityLevel level = annotation::DensityLevel::kNoDebris;
};

struct NamedParameter {
  std::string name;
  ag::Var var;
};

// Prompt-conditioned transformer decoder over frozen encoder activations.
// Layer activations are visited deepest first; each is projected to
// token_dim and added to the running tokens before a post-norm transformer
// block. The conditional embedding modulates the tokens (FiLM) before block
// cond_layer. Patch tokens (CLS dropped) are then upsampled to pixels.
class Decoder {
 public:
  Decoder(DecoderConfig config, std::uint64_t seed);
  Decoder(const Decoder&) = delete;
  Decoder& operator=(const Decoder&) = delete;
  Decoder(Decoder&&) = default;
  Decoder& operator=(Decoder&&) = default;

  // Deep copy with independent parameter storage.
  Decoder clone() const;

  // Returns an (H*W) x 1 logit column in row-major pixel order, recording a
  // graph when gradients are enabled. cond must be 1 x cond_dim.
  ag::Var forward(const EncoderActivations& activations, const ag::Var& cond) const;

  LogitMap decode(const EncoderActivations& activations, const EmbeddingVec& cond,
                  annotation::DensityLevel level = annotation::DensityLevel::kNoDebris) const;

  const DecoderConfig& config() const { return config_; }
  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const NamedParameter* find(std::string_view name) const;
  std::size_t parameter_count() const;
  void zero_grad();

  // SHA-256 of every parameter value in declaration order.
  std::string weights_hash() const;

 private:
  struct Block {
    ag::Var in_w, in_b, out_w, out_b, l1_w, l1_b, l2_w, l2_b, n1_w, n1_b, n2_w, n2_b;
  };

  Decoder() = default;
  ag::Var add_param(std::string name, ag::Matrix init);
  void bind();
  ag::Var run_block(const Block& block, const ag::Var& x) const;
  ag::Var run_head(const ag::Var& tokens, int side) const;

  DecoderConfig config_;
  std::vector<NamedParameter> params_;
  std::vector<ag::Var> reduce_w_, reduce_b_;
  ag::Var film_mul_w_, film_mul_b_, film_add_w_, film_add_b_;
  std::vector<Block> blocks_;
  std::vector<ag::Var> head_;
};

ag::Matrix embedding_row(const EmbeddingVec& e);
Grid<double> logits_to_grid(const ag::Matrix& column, int rows, int cols);

}  // namespace debris::segmodel
