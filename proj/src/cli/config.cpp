#include "debris/cli/config.hpp"

#include <set>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/segmodel/checkpoint.hpp"

namespace debris::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& section, const std::string& name, const std::set<std::string>& known) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + name + "." + key + "'");
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) out = section.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(ground_size_m > 0.0)) throw ConfigError("tiling.ground_size_m must be positive");
  if (target_px < 16 || target_px % 16 != 0) throw ConfigError("tiling.target_px must be a positive multiple of 16");
  if (!(brightness_factor > 0.0 && brightness_factor < 1.0))
    throw ConfigError("promptcraft.brightness_factor must lie in (0, 1)");
  if (!(blur_sigma_px > 0.0)) throw ConfigError("promptcraft.blur_sigma_px must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("evaluation.val_fraction must lie in (0, 1)");
  if (held_out_event.empty()) throw ConfigError("evaluation.held_out_event must be set");
  if (worker_count < 1) throw ConfigError("runtime.worker_count must be >= 1");
  if (output_root.empty()) throw ConfigError("paths.output_root must be set");
  if (backend != "mock") throw ConfigError("model.backend '" + backend + "' is not available (expected mock)");
  training.validate();
  decoder.validate();
  if (decoder.patch_size != mock.patch_size) throw ConfigError("model.decoder.patch_size must match the encoder");
  if (decoder.encoder_width != mock.width) throw ConfigError("model.decoder.encoder_width must match the encoder");
  for (int layer : decoder.extract_layers)
    if (layer < 1 || layer > mock.num_layers)
      throw ConfigError("model.decoder.extract_layers names a layer the encoder lacks");
}

fs::path PipelineConfig::resolve(const std::string& path) const {
  if (path.empty()) return {};
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

json config_to_json(const PipelineConfig& c) {
  return {{"schema_version", PipelineConfig::kSchemaVersion},
          {"paths",
           {{"raster_dir", c.raster_dir},
            {"dataset_index", c.dataset_index},
            {"data_root", c.data_root},
            {"output_root", c.output_root}}},
          {"tiling", {{"ground_size_m", c.ground_size_m}, {"target_px", c.target_px}}},
          {"promptcraft", {{"brightness_factor", c.brightness_factor}, {"blur_sigma_px", c.blur_sigma_px}}},
          {"training", c.training},
          {"model",
           {{"backend", c.backend},
            {"mock", {{"width", c.mock.width}, {"num_layers", c.mock.num_layers}, {"patch_size", c.mock.patch_size},
                      {"seed", c.mock.seed}}},
            {"decoder", segmodel::config_to_json(c.decoder)},
            {"decoder_seed", c.decoder_seed},
            {"init_checkpoint", c.init_checkpoint}}},
          {"evaluation", {{"held_out_event", c.held_out_event}, {"val_fraction", c.val_fraction}}},
          {"runtime",
           {{"seed", c.seed}, {"deterministic_mode", c.deterministic_mode}, {"worker_count", c.worker_count}}}};
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  c.base_dir = base_dir;
  check_keys(j, "<root>",
             {"schema_version", "paths", "tiling", "promptcraft", "training", "model", "evaluation", "runtime"});
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != PipelineConfig::kSchemaVersion)
    throw ConfigError("unsupported config schema_version " + j.at("schema_version").dump());
  try {
    if (j.contains("paths")) {
      const json& s = j.at("paths");
      check_keys(s, "paths", {"raster_dir", "dataset_index", "data_root", "output_root"});
      read(s, "raster_dir", c.raster_dir);
      read(s, "dataset_index", c.dataset_index);
      read(s, "data_root", c.data_root);
      read(s, "output_root", c.output_root);
    }
    if (j.contains("tiling")) {
      const json& s = j.at("tiling");
      check_keys(s, "tiling", {"ground_size_m", "target_px"});
      read(s, "ground_size_m", c.ground_size_m);
      read(s, "target_px", c.target_px);
    }
    if (j.contains("promptcraft")) {
      const json& s = j.at("promptcraft");
      check_keys(s, "promptcraft", {"brightness_factor", "blur_sigma_px"});
      read(s, "brightness_factor", c.brightness_factor);
      read(s, "blur_sigma_px", c.blur_sigma_px);
    }
    if (j.contains("training")) c.training = j.at("training").get<trainer::TrainConfig>();
    if (j.contains("model")) {
      const json& s = j.at("model");
      check_keys(s, "model", {"backend", "mock", "decoder", "decoder_seed", "init_checkpoint"});
      read(s, "backend", c.backend);
      if (s.contains("mock")) {
        const json& m = s.at("mock");
        check_keys(m, "model.mock", {"width", "num_layers", "patch_size", "seed"});
        read(m, "width", c.mock.width);
        read(m, "num_layers", c.mock.num_layers);
        read(m, "patch_size", c.mock.patch_size);
        read(m, "seed", c.mock.seed);
      }
      if (s.contains("decoder")) {
        check_keys(s.at("decoder"), "model.decoder",
                   {"token_dim", "n_heads", "ffn_dim", "extract_layers", "encoder_width", "cond_dim", "patch_size",
                    "cond_layer", "head"});
        c.decoder = segmodel::config_from_json(s.at("decoder"));
      }
      read(s, "decoder_seed", c.decoder_seed);
      read(s, "init_checkpoint", c.init_checkpoint);
    }
    if (j.contains("evaluation")) {
      const json& s = j.at("evaluation");
      check_keys(s, "evaluation", {"held_out_event", "val_fraction"});
      read(s, "held_out_event", c.held_out_event);
      read(s, "val_fraction", c.val_fraction);
    }
    if (j.contains("runtime")) {
      const json& s = j.at("runtime");
      check_keys(s, "runtime", {"seed", "deterministic_mode", "worker_count"});
      read(s, "seed", c.seed);
      read(s, "deterministic_mode", c.deterministic_mode);
      read(s, "worker_count", c.worker_count);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    start = dot + 1;
  }
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  fs::path base = fs::current_path();
  if (!path.empty()) {
    if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
    try {
      doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    base = fs::absolute(path).parent_path();
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc, base);
}

void save_config(const fs::path& path, const PipelineConfig& config) {
  write_text_atomic(path, config_to_json(config).dump(2) + "\n");
}

}  // namespace debris::cli
