#include "debris/evalsuite/report.hpp"

#include <algorithm>
#include <cstdio>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/promptcraft/prompt.hpp"

namespace debris::evalsuite {
namespace {

using annotation::DatasetRecord;
using annotation::Split;

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
  return out;
}

SubsetMetrics score_subset(std::string name, const std::vector<const DatasetRecord*>& records,
                           std::vector<int> classes, const std::vector<int>& per_class_labels,
                           bool with_precision, const MaskMap& predictions, const MaskMap& ground_truth) {
  SubsetMetrics m;
  m.name = std::move(name);
  m.classes = std::move(classes);
  m.sample_count = static_cast<int>(records.size());
  double dice_sum = 0.0, iou_sum = 0.0;
  for (const auto* r : records) {
    const ConfusionCounts c = confusion(predictions.at(r->image_id), ground_truth.at(r->image_id));
    m.counts += c;
    const Score d = dice_score(c, m.classes);
    dice_sum += d.value;
    iou_sum += iou_score(c, m.classes).value;
    if (d.vacuous) ++m.vacuous_images;
  }
  m.dice = dice_score(m.counts, m.classes);
  m.iou = iou_score(m.counts, m.classes);
  if (!records.empty()) {
    m.macro_dice = dice_sum / static_cast<double>(records.size());
    m.macro_iou = iou_sum / static_cast<double>(records.size());
  }
  for (int label : per_class_labels) {
    m.recall[label] = recall_score(m.counts, label);
    if (with_precision) m.precision[label] = precision_score(m.counts, label);
  }
  return m;
}

nlohmann::json score_json(const Score& s) { return {{"value", s.value}, {"vacuous", s.vacuous}}; }

nlohmann::json subset_json(const SubsetMetrics& m) {
  nlohmann::json j;
  j["samples"] = m.sample_count;
  j["classes"] = m.classes;
  j["micro"] = {{"dice", score_json(m.dice)}, {"iou", score_json(m.iou)}};
  j["macro"] = {{"dice", m.macro_dice}, {"iou", m.macro_iou}, {"vacuous_images", m.vacuous_images}};
  nlohmann::json recall = nlohmann::json::object(), precision = nlohmann::json::object();
  for (const auto& [label, s] : m.recall) recall[std::to_string(label)] = score_json(s);
  for (const auto& [label, s] : m.precision) precision[std::to_string(label)] = score_json(s);
  j["recall"] = recall;
  j["precision"] = precision;
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& c : m.counts.per_class) {
    counts.push_back({{"tp", c.true_positive}, {"fp", c.false_positive}, {"fn", c.false_negative},
                      {"tn", c.true_negative}});
  }
  j["confusion"] = counts;
  return j;
}

std::string label_tag(int label) {
  switch (label) {
    case 0: return "no debris";
    case 1: return "low-density";
    default: return "high-density";
  }
}

void append_row(std::string& out, const std::string& subset, const std::string& metric, const Score& s) {
  char line[128];
  std::snprintf(line, sizeof line, "%-22s %-28s %6.4f%s\n", subset.c_str(), metric.c_str(), s.value,
                s.vacuous ? "  (vacuous)" : "");
  out += line;
}

void append_subset(std::string& out, const SubsetMetrics& m) {
  const std::string label = m.name + " (n=" + std::to_string(m.sample_count) + ")";
  append_row(out, label, "Dice", m.dice);
  append_row(out, "", "IoU", m.iou);
  for (const auto& [l, s] : m.recall) append_row(out, "", "Recall [" + label_tag(l) + "]", s);
  for (const auto& [l, s] : m.precision) append_row(out, "", "Precision [" + label_tag(l) + "]", s);
}

}  // namespace

MetricsReport evaluate_test_set(const annotation::DatasetManifest& manifest, const MaskMap& predictions,
                                const MaskMap& ground_truth) {
  auto records = manifest.in_split(Split::kTest);
  std::sort(records.begin(), records.end(),
            [](const DatasetRecord* a, const DatasetRecord* b) { return a->image_id < b->image_id; });
  std::vector<std::string> missing_pred, missing_gt;
  for (const auto* r : records) {
    if (!predictions.count(r->image_id)) missing_pred.push_back(r->image_id);
    if (!ground_truth.count(r->image_id)) missing_gt.push_back(r->image_id);
  }
  if (!missing_pred.empty()) throw IncompleteError("missing predictions for: " + join_ids(missing_pred));
  if (!missing_gt.empty()) throw IncompleteError("missing ground truth for: " + join_ids(missing_gt));

  std::vector<const DatasetRecord*> positive, negative;
  for (const auto* r : records) (r->is_positive ? positive : negative).push_back(r);

  MetricsReport report;
  report.debris_positive =
      score_subset("debris-positive", positive, {1, 2}, {1, 2}, true, predictions, ground_truth);
  report.debris_free = score_subset("debris-free", negative, {0}, {0}, false, predictions, ground_truth);
  return report;
}

MetricsReport evaluate_test_set(const annotation::DatasetManifest& manifest, const MaskMap& predictions,
                                const std::filesystem::path& base_dir) {
  MaskMap gt;
  std::vector<std::string> missing;
  for (const auto* r : manifest.in_split(Split::kTest)) {
    if (!r->consensus_path) {
      missing.push_back(r->image_id);
      continue;
    }
    gt.emplace(r->image_id, annotation::read_mask(promptcraft::resolve_path(base_dir, *r->consensus_path)));
  }
  if (!missing.empty()) throw IncompleteError("no consensus annotation for: " + join_ids(missing));
  return evaluate_test_set(manifest, predictions, gt);
}

MaskMap read_predictions(const std::filesystem::path& dir, const annotation::DatasetManifest& manifest) {
  MaskMap out;
  std::vector<std::string> missing;
  for (const auto* r : manifest.in_split(Split::kTest)) {
    const auto path = dir / (r->image_id + ".png");
    if (!std::filesystem::exists(path)) {
      missing.push_back(r->image_id);
      continue;
    }
    out.emplace(r->image_id, annotation::read_mask(path));
  }
  if (!missing.empty()) throw IncompleteError("missing predictions for: " + join_ids(missing));
  return out;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  return {{"debris_positive", subset_json(report.debris_positive)},
          {"debris_free", subset_json(report.debris_free)},
          {"aggregation", "micro (pixel-pooled) headline; macro is the per-image mean"}};
}

std::string format_report_table(const MetricsReport& report) {
  std::string out;
  char header[128];
  std::snprintf(header, sizeof header, "%-22s %-28s %6s\n", "Subset", "Metric", "Value");
  out += header;
  out += std::string(58, '-') + "\n";
  append_subset(out, report.debris_positive);
  out += std::string(58, '-') + "\n";
  append_subset(out, report.debris_free);
  out += std::string(58, '-') + "\n";
  char macro[160];
  std::snprintf(macro, sizeof macro,
                "macro (per-image mean): debris-positive Dice %.4f IoU %.4f; debris-free Dice %.4f IoU %.4f\n",
                report.debris_positive.macro_dice, report.debris_positive.macro_iou, report.debris_free.macro_dice,
                report.debris_free.macro_iou);
  out += macro;
  return out;
}

void write_report(const std::filesystem::path& dir, const MetricsReport& report) {
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / "metrics.json", report_to_json(report).dump(2) + "\n");
  write_text_atomic(dir / "metrics.txt", format_report_table(report));
}

}  // namespace debris::evalsuite
