#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "debris/annotation/consensus.hpp"
#include "debris/annotation/manifest.hpp"
#include "debris/annotation/mask.hpp"
#include "debris/common/error.hpp"
#include "debris/common/png_io.hpp"
#include "debris/common/rng.hpp"
#include "support.hpp"

namespace debris::annotation {
namespace {

DenseMask random_mask(Rng& rng, int rows, int cols) {
  DenseMask m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.set(r, c, level_from_int(static_cast<int>(rng.below(3))));
  return m;
}

// Floating-point ceiling of the mean; exact for these small integers.
std::uint8_t oracle_consensus(const std::vector<int>& labels) {
  double sum = 0;
  for (int l : labels) sum += l;
  return static_cast<std::uint8_t>(std::ceil(sum / static_cast<double>(labels.size())));
}

TEST(Consensus, ExhaustiveThreeAnnotatorTable) {
  int checked = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        AnnotationStack stack;
        stack.add("a", DenseMask(1, 1, level_from_int(a)));
        stack.add("b", DenseMask(1, 1, level_from_int(b)));
        stack.add("c", DenseMask(1, 1, level_from_int(c)));
        EXPECT_EQ(aggregate_consensus(stack)(0, 0), oracle_consensus({a, b, c})) << a << b << c;
        ++checked;
      }
  EXPECT_EQ(checked, 27);
}

TEST(Consensus, HandCases) {
  auto one_pixel = [](std::vector<int> labels) {
    AnnotationStack stack;
    for (std::size_t i = 0; i < labels.size(); ++i) stack.add(std::to_string(i), DenseMask(1, 1, level_from_int(labels[i])));
    return aggregate_consensus(stack)(0, 0);
  };
  EXPECT_EQ(one_pixel({0, 0, 1}), 1);  // mean 1/3 rounds up
  EXPECT_EQ(one_pixel({1, 1, 1}), 1);  // integral mean is kept
  EXPECT_EQ(one_pixel({1, 2}), 2);
  EXPECT_EQ(one_pixel({2, 0, 0, 0, 0}), 1);
  EXPECT_EQ(one_pixel({0, 0, 0}), 0);
}

TEST(Consensus, MatchesScalarBruteForceOnRandomStacks) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const int rows = 1 + static_cast<int>(rng.below(16));
    const int cols = 1 + static_cast<int>(rng.below(16));
    const int n = 1 + static_cast<int>(rng.below(5));
    AnnotationStack stack;
    for (int k = 0; k < n; ++k) stack.add("ann" + std::to_string(k), random_mask(rng, rows, cols));
    const DenseMask got = aggregate_consensus(stack);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        std::vector<int> labels;
        for (const auto& s : stack.slices()) labels.push_back(s(r, c));
        ASSERT_EQ(got(r, c), oracle_consensus(labels));
      }
  }
}

TEST(Consensus, SingleAnnotatorIsIdentityAndBoundsHold) {
  Rng rng(2);
  const DenseMask m = random_mask(rng, 9, 11);
  AnnotationStack one;
  one.add("only", m);
  EXPECT_TRUE(aggregate_consensus(one) == m);

  AnnotationStack many;
  for (int k = 0; k < 4; ++k) many.add(std::to_string(k), random_mask(rng, 9, 11));
  const DenseMask c = aggregate_consensus(many);
  for (int r = 0; r < 9; ++r)
    for (int col = 0; col < 11; ++col) {
      int lo = 2, hi = 0;
      for (const auto& s : many.slices()) {
        lo = std::min<int>(lo, s(r, col));
        hi = std::max<int>(hi, s(r, col));
      }
      EXPECT_GE(c(r, col), lo);
      EXPECT_LE(c(r, col), hi);
    }
}

TEST(Consensus, Errors) {
  AnnotationStack empty;
  EXPECT_THROW(aggregate_consensus(empty), EmptyInputError);
  AnnotationStack stack;
  stack.add("a", DenseMask(4, 4));
  EXPECT_THROW(stack.add("b", DenseMask(4, 5)), ShapeError);
  EXPECT_THROW(stack.add("a", DenseMask(4, 4)), ContractError);
}

TEST(Consensus, BinarizeAndPositiveClassification) {
  DenseMask m(2, 2);
  m.set(0, 1, DensityLevel::kLowDensity);
  m.set(1, 1, DensityLevel::kHighDensity);
  const BinaryMask low = binarize(m, DensityLevel::kLowDensity);
  EXPECT_EQ(low(0, 1), 1);
  EXPECT_EQ(low(1, 1), 0);
  EXPECT_EQ(binarize(m, DensityLevel::kNoDebris)(0, 0), 1);
  EXPECT_TRUE(classify_positive(m));
  EXPECT_FALSE(classify_positive(DenseMask(3, 3)));
  EXPECT_TRUE(contains_level(m, DensityLevel::kHighDensity));
}

TEST(Mask, PngRoundTripAndInvalidValues) {
  testing::TempDir dir;
  Rng rng(3);
  const DenseMask m = random_mask(rng, 7, 5);
  write_mask(dir / "m.png", m);
  EXPECT_TRUE(read_mask(dir / "m.png") == m);

  Grid<std::uint8_t> bad(2, 2, 0);
  bad(1, 0) = 3;
  write_png_gray(dir / "bad.png", bad);
  try {
    read_mask(dir / "bad.png");
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos);
  }
  EXPECT_THROW(DenseMask{bad}, ContractError);
  EXPECT_EQ(text_prompt(DensityLevel::kLowDensity), "debris at low-density");
  EXPECT_EQ(text_prompt(DensityLevel::kHighDensity), "debris at high-density");
  EXPECT_EQ(text_prompt(DensityLevel::kNoDebris), "no debris");
}

std::vector<DatasetRecord> make_records(int per_event) {
  std::vector<DatasetRecord> out;
  for (const char* event : {"ian", "ike", "ida"}) {
    for (int i = 0; i < per_event; ++i) {
      DatasetRecord r;
      r.image_id = std::string(event) + "_" + std::to_string(i);
      r.event = event;
      r.region = "r";
      r.image_path = r.image_id + ".png";
      r.consensus_path = r.image_id + "_c.png";
      r.is_positive = i % 2 == 0;
      out.push_back(r);
    }
  }
  return out;
}

TEST(Manifest, SplitByEventKeepsHeldOutEventPure) {
  const DatasetManifest m = split_by_event(make_records(10), "ida", 0.2, 5);
  int train = 0, val = 0, test = 0;
  for (const auto& r : m.records) {
    if (r.event == "ida") {
      EXPECT_EQ(r.split, Split::kTest);
      ++test;
    } else {
      EXPECT_NE(r.split, Split::kTest);
      (r.split == Split::kTrain ? train : val)++;
    }
  }
  EXPECT_EQ(test, 10);
  EXPECT_EQ(val, 4);  // round(0.2 * 20)
  EXPECT_EQ(train, 16);
}

TEST(Manifest, SplitIsDeterministicAndOrderIndependent) {
  auto records = make_records(12);
  const DatasetManifest a = split_by_event(records, "ida", 0.25, 9);
  std::reverse(records.begin(), records.end());
  const DatasetManifest b = split_by_event(records, "ida", 0.25, 9);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (const auto& r : a.records) EXPECT_EQ(b.find(r.image_id)->split, r.split) << r.image_id;
  const DatasetManifest c = split_by_event(make_records(12), "ida", 0.25, 10);
  bool differs = false;
  for (const auto& r : a.records) differs |= c.find(r.image_id)->split != r.split;
  EXPECT_TRUE(differs);
}

TEST(Manifest, SplitErrors) {
  EXPECT_THROW(split_by_event(make_records(3), "katrina", 0.2, 0), ConfigError);
  EXPECT_THROW(split_by_event(make_records(3), "ida", 0.0, 0), ConfigError);
  auto only_ida = make_records(3);
  only_ida.erase(std::remove_if(only_ida.begin(), only_ida.end(), [](auto& r) { return r.event != "ida"; }),
                 only_ida.end());
  EXPECT_THROW(split_by_event(only_ida, "ida", 0.2, 0), ConfigError);
  auto dup = make_records(2);
  dup.push_back(dup.front());
  EXPECT_THROW(split_by_event(dup, "ida", 0.2, 0), ContractError);
}

TEST(Manifest, BalanceReportCountsSubsets) {
  const DatasetManifest m = split_by_event(make_records(10), "ida", 0.2, 5);
  const BalanceReport report = class_balance_report(m);
  EXPECT_EQ(report.test_positive(), 5);
  EXPECT_EQ(report.test_negative(), 5);
  EXPECT_EQ(report[Split::kTrain].total() + report[Split::kValidation].total(), 20);
  EXPECT_FALSE(format_balance_report(report).empty());

  DatasetManifest incomplete = m;
  incomplete.records[3].consensus_path.reset();
  try {
    class_balance_report(incomplete);
    FAIL() << "expected IncompleteError";
  } catch (const IncompleteError& e) {
    EXPECT_NE(std::string(e.what()).find(incomplete.records[3].image_id), std::string::npos);
  }
}

TEST(Manifest, JsonRoundTripAndValidation) {
  testing::TempDir dir;
  DatasetManifest m = split_by_event(make_records(4), "ida", 0.25, 1);
  m.records[0].annotation_paths = {"a/0.png", "b/0.png"};
  write_manifest(dir / "manifest.json", m);
  const DatasetManifest back = read_manifest(dir / "manifest.json");
  ASSERT_EQ(back.records.size(), m.records.size());
  EXPECT_EQ(back.held_out_event, "ida");
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(back.records[i].image_id, m.records[i].image_id);
    EXPECT_EQ(back.records[i].split, m.records[i].split);
    EXPECT_EQ(back.records[i].annotation_paths, m.records[i].annotation_paths);
    EXPECT_EQ(back.records[i].consensus_path, m.records[i].consensus_path);
  }

  nlohmann::json j = m;
  for (auto& r : j["records"])
    if (r["event"] == "ian") {
      r["split"] = "test";
      break;
    }
  EXPECT_THROW(j.get<DatasetManifest>(), DecodeError);
}

}  // namespace
}  // namespace debris::annotation
