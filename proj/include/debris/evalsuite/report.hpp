#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "debris/annotation/manifest.hpp"
#include "debris/annotation/mask.hpp"
#include "debris/evalsuite/metrics.hpp"

namespace debris::evalsuite {

struct SubsetMetrics {
  std::string name;
  int sample_count = 0;
  std::vector<int> classes;  // classes pooled for Dice/IoU
  ConfusionCounts counts;    // summed over the subset

  // Headline numbers: pixel-pooled over the subset.
  Score dice;
  Score iou;
  std::map<int, Score> recall;
  std::map<int, Score> precision;

  // Mean of per-image scores, images in image_id order. Vacuous images
  // contribute 1 and are counted.
  double macro_dice = 1.0;
  double macro_iou = 1.0;
  int vacuous_images = 0;
};

struct MetricsReport {
  SubsetMetrics debris_positive;
  SubsetMetrics debris_free;
};

using MaskMap = std::map<std::string, annotation::DenseMask>;

// Scores every test record. Debris-positive records are pooled over classes
// {1,2} with precision and recall for 1 and 2; debris-free records over
// class 0 with recall for 0. Throws IncompleteError listing image ids that
// lack a prediction or a ground truth.
MetricsReport evaluate_test_set(const annotation::DatasetManifest& manifest, const MaskMap& predictions,
                                const MaskMap& ground_truth);

// Ground truth read from each test record's consensus_path.
MetricsReport evaluate_test_set(const annotation::DatasetManifest& manifest, const MaskMap& predictions,
                                const std::filesystem::path& base_dir);

// Loads <dir>/<image_id>.png for every test record; throws IncompleteError
// listing the ids whose file is missing.
MaskMap read_predictions(const std::filesystem::path& dir, const annotation::DatasetManifest& manifest);

nlohmann::json report_to_json(const MetricsReport& report);

// Aligned plain-text table with one row per metric, grouped by subset.
std::string format_report_table(const MetricsReport& report);

// metrics.json and metrics.txt under `dir`.
void write_report(const std::filesystem::path& dir, const MetricsReport& report);

}  // namespace debris::evalsuite
