#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace debris::annotation {

enum class Split { kTrain, kValidation, kTest };

std::string_view split_name(Split split);
Split split_from_name(std::string_view name);

struct DatasetRecord {
  std::string image_id;
  std::string event;
  std::string region;
  Split split = Split::kTrain;
  bool is_positive = false;
  std::string image_path;
  std::vector<std::string> annotation_paths;
  std::optional<std::string> consensus_path;
};

struct DatasetManifest {
  static constexpr int kSchemaVersion = 1;

  std::vector<DatasetRecord> records;
  std::string held_out_event;

  std::vector<const DatasetRecord*> in_split(Split split) const;
  const DatasetRecord* find(std::string_view image_id) const;
};

inline constexpr double kDefaultValFraction = 0.15;

// Held-out event records go to test; the rest are shuffled with `seed` and
// the first round(val_fraction * n) become validation. Records are sorted by
// image_id first, so the result does not depend on input order.
DatasetManifest split_by_event(std::vector<DatasetRecord> records, const std::string& held_out_event,
                               double val_fraction = kDefaultValFraction, std::uint64_t seed = 0);

struct SplitBalance {
  int positive = 0;
  int negative = 0;
  int total() const { return positive + negative; }
};

struct BalanceReport {
  std::array<SplitBalance, 3> per_split{};  // indexed by Split

  const SplitBalance& operator[](Split s) const { return per_split[static_cast<int>(s)]; }
  // Sizes of the debris-positive and debris-free evaluation subsets.
  int test_positive() const { return (*this)[Split::kTest].positive; }
  int test_negative() const { return (*this)[Split::kTest].negative; }
};

// Throws IncompleteError naming records that have no consensus yet.
BalanceReport class_balance_report(const DatasetManifest& manifest);

std::string format_balance_report(const BalanceReport& report);

void to_json(nlohmann::json& j, const DatasetRecord& r);
void from_json(const nlohmann::json& j, DatasetRecord& r);
void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Input listing of images before aggregation: a JSON array of objects with
// image_id, event, region and image_path.
std::vector<DatasetRecord> read_dataset_index(const std::filesystem::path& path);

}  // namespace debris::annotation
