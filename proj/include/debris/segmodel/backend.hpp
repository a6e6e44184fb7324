#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "debris/common/image.hpp"
#include "debris/segmodel/autograd.hpp"
#include "debris/segmodel/embedding.hpp"

namespace debris::segmodel {

inline const std::set<int> kDefaultCaptureLayers = {3, 7, 9};

// Token activations of selected encoder layers for one query image. Each
// matrix is (1 + grid_side^2) x encoder width; row 0 is the CLS token and the
// patch tokens follow in row-major order.
struct EncoderActivations {
  std::map<int, ag::Matrix> per_layer;
  int patch_size = 16;
  int grid_side = 0;

  int token_count() const { return 1 + grid_side * grid_side; }
};

struct ImageEncoding {
  EmbeddingVec embedding;
  EncoderActivations activations;
};

// Frozen encoder pair. Implementations are deterministic and expose no
// mutable weights.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  // Throws ShapeError unless the image is square with a side divisible by
  // the patch size.
  virtual ImageEncoding encode_image(const RgbImage& image,
                                     const std::set<int>& capture_layers = kDefaultCaptureLayers) const = 0;
  virtual EmbeddingVec encode_text(const std::string& prompt) const = 0;

  virtual int width() const = 0;
  virtual int patch_size() const = 0;
  virtual int num_layers() const = 0;
  virtual std::string name() const = 0;
  // SHA-256 over the weights and architecture; changes iff outputs could.
  virtual std::string fingerprint() const = 0;
};

struct MockBackendConfig {
  int width = 768;
  int num_layers = 12;
  int patch_size = 16;
  std::uint64_t seed = 0;
};

// Deterministic stand-in with CLIP ViT shapes: a seeded linear patch
// embedding, per-layer elementwise nonlinear maps, a seeded projection to the
// 512-d embedding space, and hash-seeded text embeddings. Patch content
// survives into every layer, so decoders trained on top can learn from it.
class MockBackend final : public EncoderBackend {
 public:
  explicit MockBackend(MockBackendConfig config = {});

  ImageEncoding encode_image(const RgbImage& image,
                             const std::set<int>& capture_layers = kDefaultCaptureLayers) const override;
  EmbeddingVec encode_text(const std::string& prompt) const override;

  int width() const override { return config_.width; }
  int patch_size() const override { return config_.patch_size; }
  int num_layers() const override { return config_.num_layers; }
  std::string name() const override { return "mock"; }
  // Rehashes the weights on every call.
  std::string fingerprint() const override;

  const MockBackendConfig& config() const { return config_; }

 private:
  MockBackendConfig config_;
  ag::Matrix patch_embed_;        // width x (3 * patch * patch)
  ag::Matrix layer_scale_;        // num_layers x width
  ag::Matrix layer_shift_;        // num_layers x width
  ag::Matrix output_projection_;  // 512 x width
};

std::unique_ptr<EncoderBackend> make_backend(const std::string& kind, const MockBackendConfig& mock);

}  // namespace debris::segmodel
