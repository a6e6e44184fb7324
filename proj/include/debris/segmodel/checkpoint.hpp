#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "debris/segmodel/decoder.hpp"

namespace debris::segmodel {

// Self-describing parameter archive:
//   8-byte magic "DBRSCKPT", u32 format version, u64 header length,
//   JSON header {schema_version, metadata, tensors:[{name, rows, cols, offset}], data_sha256},
//   then little-endian float64 tensor data.
struct TensorEntry {
  std::string name;
  ag::Matrix value;
};

struct CheckpointArchive {
  static constexpr int kSchemaVersion = 1;

  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorEntry> tensors;

  const TensorEntry* find(std::string_view name) const;
};

void write_archive(const std::filesystem::path& path, const CheckpointArchive& archive);
CheckpointArchive read_archive(const std::filesystem::path& path);

nlohmann::json config_to_json(const DecoderConfig& config);
DecoderConfig config_from_json(const nlohmann::json& j);

// Adds the decoder's parameters (optionally prefixed) and its config under
// metadata["decoder"].
void add_decoder(CheckpointArchive& archive, const Decoder& decoder);
// Copies every decoder parameter from the archive; throws DecodeError on a
// missing tensor or a shape mismatch.
void load_parameters(Decoder& decoder, const CheckpointArchive& archive);
Decoder decoder_from_archive(const CheckpointArchive& archive);

void save_decoder(const std::filesystem::path& path, const Decoder& decoder);
Decoder load_decoder(const std::filesystem::path& path);

// Text embeddings cached per backend fingerprint. Returns cached values when
// the file matches the backend, otherwise encodes and rewrites the file.
ConditionMap cached_text_conditions(const std::filesystem::path& cache_path, const EncoderBackend& backend);

}  // namespace debris::segmodel
