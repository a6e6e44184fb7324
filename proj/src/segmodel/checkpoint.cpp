#include "debris/segmodel/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/hash.hpp"
#include "debris/segmodel/multiclass.hpp"

namespace debris::segmodel {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'B', 'R', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void append_pod(std::vector<std::uint8_t>& out, const T& value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_pod(const std::vector<std::uint8_t>& in, std::size_t& at, const std::string& name) {
  if (at + sizeof(T) > in.size()) throw DecodeError(name + ": truncated checkpoint");
  T value;
  std::memcpy(&value, in.data() + at, sizeof(T));
  at += sizeof(T);
  return value;
}

}  // namespace

const TensorEntry* CheckpointArchive::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void write_archive(const fs::path& path, const CheckpointArchive& archive) {
  std::vector<std::uint8_t> data;
  json entries = json::array();
  for (const auto& t : archive.tensors) {
    entries.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"offset", data.size()}});
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.value.data());
    data.insert(data.end(), p, p + t.value.size() * sizeof(double));
  }
  json header = {{"schema_version", CheckpointArchive::kSchemaVersion},
                 {"metadata", archive.metadata},
                 {"tensors", entries},
                 {"data_sha256", sha256_hex(data)}};
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  append_pod(out, kFormatVersion);
  append_pod(out, static_cast<std::uint64_t>(header_text.size()));
  out.insert(out.end(), header_text.begin(), header_text.end());
  out.insert(out.end(), data.begin(), data.end());
  write_file_atomic(path, out);
}

CheckpointArchive read_archive(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  const std::string name = path.string();
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw DecodeError(name + " is not a decoder checkpoint");
  std::size_t at = 8;
  const auto version = read_pod<std::uint32_t>(bytes, at, name);
  if (version != kFormatVersion) throw DecodeError(name + ": unsupported checkpoint format " + std::to_string(version));
  const auto header_size = read_pod<std::uint64_t>(bytes, at, name);
  if (at + header_size > bytes.size()) throw DecodeError(name + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                         bytes.begin() + static_cast<std::ptrdiff_t>(at + header_size));
  } catch (const json::exception& e) {
    throw DecodeError(name + ": bad header: " + e.what());
  }
  at += header_size;
  const std::span<const std::uint8_t> data(bytes.data() + at, bytes.size() - at);
  if (header.at("data_sha256").get<std::string>() != sha256_hex(data))
    throw DecodeError(name + ": tensor data checksum mismatch");
  if (header.at("schema_version").get<int>() != CheckpointArchive::kSchemaVersion)
    throw DecodeError(name + ": unsupported schema_version");

  CheckpointArchive archive;
  archive.metadata = header.at("metadata");
  for (const auto& e : header.at("tensors")) {
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    const auto offset = e.at("offset").get<std::size_t>();
    const std::size_t count = static_cast<std::size_t>(rows * cols);
    if (rows < 0 || cols < 0 || offset + count * sizeof(double) > data.size())
      throw DecodeError(name + ": tensor '" + e.at("name").get<std::string>() + "' exceeds the data block");
    TensorEntry t{e.at("name").get<std::string>(), ag::Matrix(rows, cols)};
    std::memcpy(t.value.data(), data.data() + offset, count * sizeof(double));
    archive.tensors.push_back(std::move(t));
  }
  return archive;
}

json config_to_json(const DecoderConfig& c) {
  return {{"token_dim", c.token_dim},         {"n_heads", c.n_heads},       {"ffn_dim", c.ffn_dim},
          {"extract_layers", c.extract_layers}, {"encoder_width", c.encoder_width}, {"cond_dim", c.cond_dim},
          {"patch_size", c.patch_size},       {"cond_layer", c.cond_layer}, {"head", head_name(c.head)}};
}

DecoderConfig config_from_json(const json& j) {
  DecoderConfig c;
  c.token_dim = j.value("token_dim", c.token_dim);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.extract_layers = j.value("extract_layers", c.extract_layers);
  c.encoder_width = j.value("encoder_width", c.encoder_width);
  c.cond_dim = j.value("cond_dim", c.cond_dim);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.cond_layer = j.value("cond_layer", c.cond_layer);
  c.head = head_from_name(j.value("head", std::string(head_name(c.head))));
  c.validate();
  return c;
}

void add_decoder(CheckpointArchive& archive, const Decoder& decoder) {
  archive.metadata["decoder"] = config_to_json(decoder.config());
  for (const auto& p : decoder.parameters()) archive.tensors.push_back({p.name, p.var.value()});
}

void load_parameters(Decoder& decoder, const CheckpointArchive& archive) {
  for (auto& p : decoder.parameters()) {
    const TensorEntry* t = archive.find(p.name);
    if (!t) throw DecodeError("checkpoint lacks decoder parameter '" + p.name + "'");
    if (t->value.rows() != p.var.rows() || t->value.cols() != p.var.cols()) {
      throw DecodeError("checkpoint parameter '" + p.name + "' is " + std::to_string(t->value.rows()) + "x" +
                        std::to_string(t->value.cols()) + ", decoder expects " + std::to_string(p.var.rows()) +
                        "x" + std::to_string(p.var.cols()));
    }
    p.var.mutable_value() = t->value;
  }
}

Decoder decoder_from_archive(const CheckpointArchive& archive) {
  if (!archive.metadata.contains("decoder")) throw DecodeError("checkpoint has no decoder metadata");
  Decoder decoder(config_from_json(archive.metadata.at("decoder")), 0);
  load_parameters(decoder, archive);
  return decoder;
}

void save_decoder(const fs::path& path, const Decoder& decoder) {
  CheckpointArchive archive;
  archive.metadata["kind"] = "decoder";
  add_decoder(archive, decoder);
  write_archive(path, archive);
}

Decoder load_decoder(const fs::path& path) { return decoder_from_archive(read_archive(path)); }

ConditionMap cached_text_conditions(const fs::path& cache_path, const EncoderBackend& backend) {
  if (fs::exists(cache_path)) {
    try {
      const json doc = json::parse(read_text_file(cache_path));
      if (doc.at("schema_version").get<int>() == 1 &&
          doc.at("backend_fingerprint").get<std::string>() == backend.fingerprint()) {
        ConditionMap conds;
        for (annotation::DensityLevel level : annotation::kAllLevels) {
          const auto values = doc.at("embeddings").at(std::string(annotation::text_prompt(level))).get<std::vector<double>>();
          conds.emplace(level, EmbeddingVec(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                                               static_cast<Eigen::Index>(values.size()))));
        }
        return conds;
      }
    } catch (const json::exception&) {
      // Unreadable cache: fall through and rebuild it.
    }
  }
  ConditionMap conds = text_conditions(backend);
  json doc = {{"schema_version", 1}, {"backend", backend.name()}, {"backend_fingerprint", backend.fingerprint()}};
  for (const auto& [level, e] : conds)
    doc["embeddings"][std::string(annotation::text_prompt(level))] =
        std::vector<double>(e.values().data(), e.values().data() + e.values().size());
  write_text_atomic(cache_path, doc.dump() + "\n");
  return conds;
}

}  // namespace debris::segmodel
