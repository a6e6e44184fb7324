#include <gtest/gtest.h>

#include <algorithm>

#include "debris/annotation/manifest.hpp"
#include "debris/annotation/mask.hpp"
#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/rng.hpp"
#include "debris/evalsuite/metrics.hpp"
#include "debris/evalsuite/report.hpp"
#include "support.hpp"

namespace debris::evalsuite {
namespace {

using annotation::DatasetManifest;
using annotation::DatasetRecord;
using annotation::DenseMask;
using annotation::DensityLevel;
using annotation::Split;

DenseMask random_mask(Rng& rng, int h, int w) {
  DenseMask m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) m.set(r, c, static_cast<DensityLevel>(rng.below(3)));
  return m;
}

// Per-pixel, per-class scalar loop.
ConfusionCounts oracle_confusion(const DenseMask& pred, const DenseMask& gt) {
  ConfusionCounts out;
  for (int label = 0; label < 3; ++label) {
    auto& c = out.per_class[label];
    for (int r = 0; r < gt.rows(); ++r)
      for (int col = 0; col < gt.cols(); ++col) {
        const bool p = pred(r, col) == label, g = gt(r, col) == label;
        if (p && g) ++c.true_positive;
        else if (p) ++c.false_positive;
        else if (g) ++c.false_negative;
        else ++c.true_negative;
      }
  }
  return out;
}

double oracle_dice(const ConfusionCounts& k, const std::vector<int>& classes) {
  double tp = 0, fp = 0, fn = 0;
  for (int c : classes) {
    tp += k[c].true_positive;
    fp += k[c].false_positive;
    fn += k[c].false_negative;
  }
  return 2 * tp + fp + fn == 0 ? 1.0 : 2 * tp / (2 * tp + fp + fn);
}

double oracle_iou(const ConfusionCounts& k, const std::vector<int>& classes) {
  double tp = 0, fp = 0, fn = 0;
  for (int c : classes) {
    tp += k[c].true_positive;
    fp += k[c].false_positive;
    fn += k[c].false_negative;
  }
  return tp + fp + fn == 0 ? 1.0 : tp / (tp + fp + fn);
}

const std::vector<std::vector<int>> kClassSets = {{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};

TEST(Confusion, MatchesScalarOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(32)), w = 1 + static_cast<int>(rng.below(32));
    const DenseMask pred = random_mask(rng, h, w), gt = random_mask(rng, h, w);
    const ConfusionCounts k = confusion(pred, gt);
    ASSERT_EQ(k, oracle_confusion(pred, gt));
    for (int c = 0; c < 3; ++c) EXPECT_EQ(k[c].total(), static_cast<std::uint64_t>(h * w));
    for (const auto& classes : kClassSets) {
      EXPECT_NEAR(dice(k, classes), oracle_dice(k, classes), 1e-15);
      EXPECT_NEAR(iou(k, classes), oracle_iou(k, classes), 1e-15);
    }
  }
}

TEST(Confusion, HandCase) {
  // gt class 1 = {1,0,0,0}, pred class 1 = {1,1,0,0}.
  DenseMask gt(1, 4), pred(1, 4);
  gt.set(0, 0, DensityLevel::kLowDensity);
  pred.set(0, 0, DensityLevel::kLowDensity);
  pred.set(0, 1, DensityLevel::kLowDensity);
  const auto k = confusion(pred, gt);
  EXPECT_EQ(k[1], (ClassCounts{1, 1, 0, 2}));
  EXPECT_EQ(dice(k, {1}), 2.0 / 3.0);
  EXPECT_EQ(iou(k, {1}), 0.5);
  EXPECT_EQ(precision(k, 1), 0.5);
  EXPECT_EQ(recall(k, 1), 1.0);
}

TEST(Confusion, IdenticalAndComplementary) {
  Rng rng(2);
  const DenseMask m = random_mask(rng, 9, 7);
  const auto same = confusion(m, m);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(same[c].false_positive, 0u);
    EXPECT_EQ(same[c].false_negative, 0u);
  }
  DenseMask a(4, 4), b(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) ((r + c) % 2 ? a : b).set(r, c, DensityLevel::kLowDensity);
  const auto comp = confusion(a, b);
  EXPECT_EQ(comp[1].true_positive, 0u);
  EXPECT_EQ(comp[1].true_negative, 0u);
  EXPECT_EQ(dice(comp, {1}), 0.0);
}

TEST(Confusion, ShapeMismatch) { EXPECT_THROW(confusion(DenseMask(3, 3), DenseMask(3, 4)), ShapeError); }

TEST(Metrics, DiceIouIdentityAndSymmetry) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(20)), w = 1 + static_cast<int>(rng.below(20));
    const DenseMask a = random_mask(rng, h, w), b = random_mask(rng, h, w);
    const auto ab = confusion(a, b), ba = confusion(b, a);
    for (const auto& classes : kClassSets) {
      const double d = dice(ab, classes), j = iou(ab, classes);
      EXPECT_NEAR(d, 2 * j / (1 + j), 1e-12);
      EXPECT_NEAR(j, d / (2 - d), 1e-12);
      EXPECT_EQ(d, dice(ba, classes));
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
  }
}

TEST(Metrics, VacuousConventions) {
  const DenseMask zeros(5, 5);
  const auto k = confusion(zeros, zeros);
  const Score d = dice_score(k, {1, 2});
  EXPECT_EQ(d.value, 1.0);
  EXPECT_TRUE(d.vacuous);
  const Score p = precision_score(k, 1);
  EXPECT_EQ(p.value, 1.0);
  EXPECT_TRUE(p.vacuous);
  const Score r = recall_score(k, 2);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_TRUE(r.vacuous);
  EXPECT_FALSE(dice_score(k, {0}).vacuous);
}

TEST(Metrics, AllPredictedPositiveHalfActual) {
  DenseMask pred(2, 2, DensityLevel::kHighDensity), gt(2, 2);
  gt.set(0, 0, DensityLevel::kHighDensity);
  gt.set(0, 1, DensityLevel::kHighDensity);
  const auto k = confusion(pred, gt);
  EXPECT_EQ(precision(k, 2), 0.5);
  EXPECT_EQ(recall(k, 2), 1.0);
}

TEST(Metrics, ContractErrors) {
  const auto k = confusion(DenseMask(2, 2), DenseMask(2, 2));
  EXPECT_THROW(dice(k, {}), ContractError);
  EXPECT_THROW(iou(k, {}), ContractError);
  EXPECT_THROW(dice(k, {3}), ContractError);
  EXPECT_THROW(precision(k, -1), ContractError);
  EXPECT_THROW(recall(k, 3), ContractError);
}

// ---------------------------------------------------------------- report

struct TestSet {
  DatasetManifest manifest;
  MaskMap truth;
};

// Positive records carry both debris levels; negatives are all zero.
TestSet make_test_set(Rng& rng, int positives, int negatives) {
  TestSet t;
  t.manifest.held_out_event = "ida";
  auto add = [&](const std::string& id, bool positive) {
    DatasetRecord r;
    r.image_id = id;
    r.event = "ida";
    r.split = Split::kTest;
    r.is_positive = positive;
    r.image_path = id + ".png";
    r.consensus_path = "c/" + id + ".png";
    t.manifest.records.push_back(r);
    DenseMask m(12, 12);
    if (positive) {
      m = random_mask(rng, 12, 12);
      m.set(0, 0, DensityLevel::kLowDensity);
      m.set(0, 1, DensityLevel::kHighDensity);
    }
    t.truth[id] = m;
  };
  for (int i = 0; i < positives; ++i) add("p" + std::to_string(i), true);
  for (int i = 0; i < negatives; ++i) add("n" + std::to_string(i), false);
  // A training record never enters the report.
  DatasetRecord train;
  train.image_id = "train0";
  train.event = "ian";
  train.is_positive = true;
  t.manifest.records.push_back(train);
  return t;
}

void expect_range(const MetricsReport& r) {
  for (const auto* s : {&r.debris_positive, &r.debris_free}) {
    for (double v : {s->dice.value, s->iou.value, s->macro_dice, s->macro_iou}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (const auto& [_, sc] : s->recall) EXPECT_TRUE(sc.value >= 0.0 && sc.value <= 1.0);
    for (const auto& [_, sc] : s->precision) EXPECT_TRUE(sc.value >= 0.0 && sc.value <= 1.0);
  }
}

TEST(Report, PerfectPredictionsScoreOne) {
  Rng rng(4);
  const TestSet t = make_test_set(rng, 3, 2);
  const auto r = evaluate_test_set(t.manifest, t.truth, t.truth);
  EXPECT_EQ(r.debris_positive.sample_count, 3);
  EXPECT_EQ(r.debris_free.sample_count, 2);
  EXPECT_EQ(r.debris_positive.classes, (std::vector<int>{1, 2}));
  EXPECT_EQ(r.debris_free.classes, (std::vector<int>{0}));
  for (const auto* s : {&r.debris_positive, &r.debris_free}) {
    EXPECT_EQ(s->dice.value, 1.0);
    EXPECT_EQ(s->iou.value, 1.0);
    EXPECT_EQ(s->macro_dice, 1.0);
    for (const auto& [_, sc] : s->recall) EXPECT_EQ(sc.value, 1.0);
    for (const auto& [_, sc] : s->precision) EXPECT_EQ(sc.value, 1.0);
  }
  EXPECT_EQ(r.debris_positive.recall.size(), 2u);
  EXPECT_EQ(r.debris_positive.precision.size(), 2u);
  ASSERT_EQ(r.debris_free.recall.count(0), 1u);
  EXPECT_EQ(r.debris_free.recall.at(0).value, 1.0);
}

TEST(Report, AllZeroPredictionsOnPositives) {
  Rng rng(5);
  const TestSet t = make_test_set(rng, 3, 2);
  MaskMap zeros;
  for (const auto& [id, m] : t.truth) zeros[id] = DenseMask(m.rows(), m.cols());
  const auto r = evaluate_test_set(t.manifest, zeros, t.truth);
  EXPECT_EQ(r.debris_positive.dice.value, 0.0);
  EXPECT_EQ(r.debris_positive.recall.at(1).value, 0.0);
  EXPECT_EQ(r.debris_positive.recall.at(2).value, 0.0);
  EXPECT_EQ(r.debris_free.dice.value, 1.0);
  EXPECT_EQ(r.debris_free.recall.at(0).value, 1.0);
}

TEST(Report, MatchesPooledOracle) {
  Rng rng(6);
  const TestSet t = make_test_set(rng, 4, 3);
  MaskMap preds;
  for (const auto& [id, m] : t.truth) preds[id] = random_mask(rng, m.rows(), m.cols());
  const auto r = evaluate_test_set(t.manifest, preds, t.truth);
  ConfusionCounts pos, neg;
  for (const auto& rec : t.manifest.records) {
    if (rec.split != Split::kTest) continue;
    (rec.is_positive ? pos : neg) += oracle_confusion(preds.at(rec.image_id), t.truth.at(rec.image_id));
  }
  EXPECT_EQ(r.debris_positive.counts, pos);
  EXPECT_EQ(r.debris_free.counts, neg);
  EXPECT_DOUBLE_EQ(r.debris_positive.dice.value, oracle_dice(pos, {1, 2}));
  EXPECT_DOUBLE_EQ(r.debris_positive.iou.value, oracle_iou(pos, {1, 2}));
  EXPECT_DOUBLE_EQ(r.debris_free.dice.value, oracle_dice(neg, {0}));
  expect_range(r);
}

TEST(Report, PermutationInvariant) {
  Rng rng(7);
  TestSet t = make_test_set(rng, 5, 4);
  MaskMap preds;
  for (const auto& [id, m] : t.truth) preds[id] = random_mask(rng, m.rows(), m.cols());
  const auto base = report_to_json(evaluate_test_set(t.manifest, preds, t.truth));
  for (int i = 0; i < 10; ++i) {
    rng.shuffle(t.manifest.records);
    EXPECT_EQ(report_to_json(evaluate_test_set(t.manifest, preds, t.truth)), base);
  }
}

TEST(Report, MissingPredictionsListed) {
  Rng rng(8);
  const TestSet t = make_test_set(rng, 2, 2);
  MaskMap preds = t.truth;
  preds.erase("p1");
  preds.erase("n0");
  try {
    evaluate_test_set(t.manifest, preds, t.truth);
    FAIL() << "expected IncompleteError";
  } catch (const IncompleteError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("p1"), std::string::npos) << what;
    EXPECT_NE(what.find("n0"), std::string::npos) << what;
    EXPECT_EQ(what.find("p0"), std::string::npos) << what;
  }
}

TEST(Report, ReadPredictionsAndWriteReport) {
  Rng rng(9);
  const TestSet t = make_test_set(rng, 2, 1);
  testing::TempDir dir;
  for (const auto& [id, m] : t.truth) {
    annotation::write_mask(dir / ("pred/" + id + ".png"), m);
    annotation::write_mask(dir / ("c/" + id + ".png"), m);
  }
  const MaskMap preds = read_predictions(dir / "pred", t.manifest);
  EXPECT_EQ(preds, t.truth);
  const auto r = evaluate_test_set(t.manifest, preds, dir.path());
  EXPECT_EQ(r.debris_positive.dice.value, 1.0);
  write_report(dir / "reports", r);
  const auto json = nlohmann::json::parse(read_text_file(dir / "reports/metrics.json"));
  EXPECT_EQ(json, report_to_json(r));
  const std::string table = read_text_file(dir / "reports/metrics.txt");
  EXPECT_NE(table.find("Dice"), std::string::npos);
  EXPECT_NE(table.find("IoU"), std::string::npos);

  std::filesystem::remove(dir / "pred/n0.png");
  EXPECT_THROW(read_predictions(dir / "pred", t.manifest), IncompleteError);
}

}  // namespace
}  // namespace debris::evalsuite
