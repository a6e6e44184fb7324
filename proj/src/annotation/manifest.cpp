#include "debris/annotation/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/rng.hpp"

namespace debris::annotation {

using nlohmann::json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw DecodeError("unknown split '" + std::string(name) + "'");
}

std::vector<const DatasetRecord*> DatasetManifest::in_split(Split split) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

const DatasetRecord* DatasetManifest::find(std::string_view image_id) const {
  for (const auto& r : records)
    if (r.image_id == image_id) return &r;
  return nullptr;
}

DatasetManifest split_by_event(std::vector<DatasetRecord> records, const std::string& held_out_event,
                               double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in (0, 1), got " + std::to_string(val_fraction));
  std::sort(records.begin(), records.end(),
            [](const DatasetRecord& a, const DatasetRecord& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].image_id == records[i - 1].image_id)
      throw ContractError("duplicate image_id '" + records[i].image_id + "'");

  std::vector<std::size_t> others;
  bool held_out_present = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].event == held_out_event) {
      records[i].split = Split::kTest;
      held_out_present = true;
    } else {
      others.push_back(i);
    }
  }
  if (!held_out_present)
    throw ConfigError("held-out event '" + held_out_event + "' has no records");
  if (others.empty()) throw ConfigError("no records outside the held-out event '" + held_out_event + "'");

  Rng rng(seed);
  rng.shuffle(others);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(others.size())));
  for (std::size_t k = 0; k < others.size(); ++k)
    records[others[k]].split = k < n_val ? Split::kValidation : Split::kTrain;

  DatasetManifest manifest;
  manifest.records = std::move(records);
  manifest.held_out_event = held_out_event;
  return manifest;
}

BalanceReport class_balance_report(const DatasetManifest& manifest) {
  std::vector<std::string> missing;
  BalanceReport report;
  for (const auto& r : manifest.records) {
    if (!r.consensus_path) {
      missing.push_back(r.image_id);
      continue;
    }
    auto& bucket = report.per_split[static_cast<int>(r.split)];
    (r.is_positive ? bucket.positive : bucket.negative)++;
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ...";
    throw IncompleteError(std::to_string(missing.size()) + " record(s) lack a consensus annotation: " + list);
  }
  return report;
}

std::string format_balance_report(const BalanceReport& report) {
  std::ostringstream out;
  out << "split        positive  negative     total\n";
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    const auto& b = report[s];
    char line[96];
    std::snprintf(line, sizeof(line), "%-10s %10d %9d %9d\n", std::string(split_name(s)).c_str(), b.positive,
                  b.negative, b.total());
    out << line;
  }
  return out.str();
}

void to_json(json& j, const DatasetRecord& r) {
  j = json{{"image_id", r.image_id},
           {"event", r.event},
           {"region", r.region},
           {"split", split_name(r.split)},
           {"is_positive", r.is_positive},
           {"image_path", r.image_path},
           {"annotation_paths", r.annotation_paths},
           {"consensus_path", r.consensus_path ? json(*r.consensus_path) : json(nullptr)}};
}

void from_json(const json& j, DatasetRecord& r) {
  j.at("image_id").get_to(r.image_id);
  j.at("event").get_to(r.event);
  r.region = j.value("region", std::string{});
  r.split = j.contains("split") ? split_from_name(j.at("split").get<std::string>()) : Split::kTrain;
  r.is_positive = j.value("is_positive", false);
  j.at("image_path").get_to(r.image_path);
  r.annotation_paths = j.value("annotation_paths", std::vector<std::string>{});
  if (j.contains("consensus_path") && !j.at("consensus_path").is_null())
    r.consensus_path = j.at("consensus_path").get<std::string>();
  else
    r.consensus_path.reset();
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"schema_version", DatasetManifest::kSchemaVersion},
           {"held_out_event", m.held_out_event},
           {"records", m.records}};
}

void from_json(const json& j, DatasetManifest& m) {
  const int version = j.at("schema_version").get<int>();
  if (version != DatasetManifest::kSchemaVersion)
    throw DecodeError("unsupported manifest schema_version " + std::to_string(version));
  j.at("held_out_event").get_to(m.held_out_event);
  j.at("records").get_to(m.records);
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (!ids.insert(r.image_id).second) throw DecodeError("duplicate image_id '" + r.image_id + "' in manifest");
    if (r.event == m.held_out_event && r.split != Split::kTest)
      throw DecodeError("record '" + r.image_id + "' of the held-out event is not in the test split");
    if (r.event != m.held_out_event && r.split == Split::kTest)
      throw DecodeError("record '" + r.image_id + "' is in the test split but not from the held-out event");
  }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  write_text_atomic(path, json(manifest).dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path)).get<DatasetManifest>();
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::vector<DatasetRecord> read_dataset_index(const std::filesystem::path& path) {
  try {
    json doc = json::parse(read_text_file(path));
    const json& list = doc.is_object() ? doc.at("records") : doc;
    return list.get<std::vector<DatasetRecord>>();
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

}  // namespace debris::annotation
