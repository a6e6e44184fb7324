#include "debris/segmodel/backend.hpp"

#include <cmath>

#include "debris/common/error.hpp"
#include "debris/common/hash.hpp"
#include "debris/common/log.hpp"
#include "debris/common/rng.hpp"

namespace debris::segmodel {

namespace {

constexpr double kClipMean[3] = {0.48145466, 0.4578275, 0.40821073};
constexpr double kClipStd[3] = {0.26862954, 0.26130258, 0.27577711};

ag::Matrix random_normal(Rng& rng, int rows, int cols, double stddev) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

Eigen::VectorXd to_unit_rms(Eigen::VectorXd v) {
  const double norm = v.norm();
  if (norm > 0.0) v *= std::sqrt(static_cast<double>(v.size())) / norm;
  return v;
}

template <typename M>
void hash_matrix(Sha256& h, const M& m) {
  h.update_pod(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

}  // namespace

MockBackend::MockBackend(MockBackendConfig config) : config_(config) {
  if (config_.width < 1 || config_.num_layers < 1 || config_.patch_size < 1)
    throw ConfigError("mock backend dimensions must be positive");
  Rng rng(config_.seed ^ 0x6d6f636b2d656e63ULL);
  const int patch_dim = 3 * config_.patch_size * config_.patch_size;
  patch_embed_ = random_normal(rng, config_.width, patch_dim, 1.0 / std::sqrt(static_cast<double>(patch_dim)));
  layer_scale_.resize(config_.num_layers, config_.width);
  layer_shift_.resize(config_.num_layers, config_.width);
  for (Eigen::Index i = 0; i < layer_scale_.size(); ++i) {
    layer_scale_.data()[i] = rng.uniform(0.5, 1.5);
    layer_shift_.data()[i] = 0.1 * rng.normal();
  }
  output_projection_ =
      random_normal(rng, kEmbeddingDim, config_.width, 1.0 / std::sqrt(static_cast<double>(config_.width)));
}

std::string MockBackend::fingerprint() const {
  Sha256 h;
  h.update("mock-backend-v1");
  const int dims[4] = {config_.width, config_.num_layers, config_.patch_size, 0};
  h.update_pod(std::span<const int>(dims, 4));
  hash_matrix(h, patch_embed_);
  hash_matrix(h, layer_scale_);
  hash_matrix(h, layer_shift_);
  hash_matrix(h, output_projection_);
  return h.hex_digest();
}

ImageEncoding MockBackend::encode_image(const RgbImage& image, const std::set<int>& capture_layers) const {
  const int p = config_.patch_size;
  if (image.empty() || image.height() != image.width() || image.height() % p != 0) {
    throw ShapeError("encoder input must be square with a side divisible by " + std::to_string(p) + ", got " +
                     std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  for (int layer : capture_layers)
    if (layer < 1 || layer > config_.num_layers)
      throw ContractError("encoder has no layer " + std::to_string(layer));

  const int side = image.height() / p;
  const int patches = side * side;
  const int patch_dim = 3 * p * p;
  ag::Matrix pixels(patches, patch_dim);
  for (int gy = 0; gy < side; ++gy) {
    for (int gx = 0; gx < side; ++gx) {
      const int t = gy * side + gx;
      for (int ch = 0; ch < 3; ++ch)
        for (int ky = 0; ky < p; ++ky)
          for (int kx = 0; kx < p; ++kx) {
            const double v = image.at(gy * p + ky, gx * p + kx, ch) / 255.0;
            pixels(t, (ch * p + ky) * p + kx) = (v - kClipMean[ch]) / kClipStd[ch];
          }
    }
  }
  ag::Matrix tokens(patches + 1, config_.width);
  tokens.bottomRows(patches) = pixels * patch_embed_.transpose();
  for (int t = 0; t < patches; ++t)
    for (int j = 0; j < config_.width; ++j)
      tokens(t + 1, j) += 0.1 * std::sin((t + 1) * (0.5 + 0.37 * j / config_.width) + j);
  tokens.row(0) = tokens.bottomRows(patches).colwise().mean();

  auto layer_output = [&](int layer) {
    ag::Matrix out = tokens;
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      out.row(r) = (out.row(r).array() * layer_scale_.row(layer - 1).array() + layer_shift_.row(layer - 1).array())
                       .tanh();
    return out;
  };

  ImageEncoding enc;
  enc.activations.patch_size = p;
  enc.activations.grid_side = side;
  for (int layer : capture_layers) enc.activations.per_layer[layer] = layer_output(layer);
  const ag::Matrix last = layer_output(config_.num_layers);
  enc.embedding = EmbeddingVec(to_unit_rms(output_projection_ * last.row(0).transpose()));
  return enc;
}

EmbeddingVec MockBackend::encode_text(const std::string& prompt) const {
  if (prompt.empty()) log_warning("encoding an empty text prompt");
  Rng rng(config_.seed ^ fnv1a64(prompt) ^ 0x746578742d656e63ULL);
  Eigen::VectorXd v(kEmbeddingDim);
  for (int i = 0; i < kEmbeddingDim; ++i) v(i) = rng.normal();
  return EmbeddingVec(to_unit_rms(std::move(v)));
}

std::unique_ptr<EncoderBackend> make_backend(const std::string& kind, const MockBackendConfig& mock) {
  if (kind == "mock") return std::make_unique<MockBackend>(mock);
  throw BackendError("encoder backend '" + kind + "' is not available in this build (supported: mock)");
}

}  // namespace debris::segmodel
