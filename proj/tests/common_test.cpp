#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>

#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/hash.hpp"
#include "debris/common/parallel.hpp"
#include "debris/common/png_io.hpp"
#include "debris/common/rng.hpp"
#include "support.hpp"

namespace debris {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SerializeRestoresPosition) {
  Rng a(7);
  for (int i = 0; i < 10; ++i) a.normal();
  Rng b = Rng::deserialize(a.serialize());
  EXPECT_TRUE(a == b);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, DrawsStayInRange) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(7), 7u);
  }
  EXPECT_EQ(rng.weighted({0.0, 1.0, 0.0}), 1u);
  EXPECT_THROW(rng.weighted({0.0, 0.0}), DomainError);
}

TEST(Rng, NormalHasUnitMoments) {
  Rng rng(2);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  // Five standard errors.
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n - mean * mean, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
}

TEST(Hash, KnownVectors) {
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  // FNV-1a 64 offset basis for the empty string.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
  testing::TempDir dir;
  write_text_atomic(dir / "a.txt", "hello");
  EXPECT_EQ(read_text_file(dir / "a.txt"), "hello");
  write_text_atomic(dir / "a.txt", "world");
  EXPECT_EQ(read_text_file(dir / "a.txt"), "world");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1);
  EXPECT_THROW(read_text_file(dir / "missing.txt"), IoError);
  // The parent "directory" is a regular file.
  EXPECT_THROW(write_text_atomic(dir / "a.txt" / "x.txt", "x"), IoError);
}

TEST(Png, RgbGrayAndIndexedRoundTrip) {
  testing::TempDir dir;
  Rng rng(4);
  RgbImage img(13, 17);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.below(256));
  write_png_rgb(dir / "rgb.png", img);
  EXPECT_TRUE(read_png_rgb(dir / "rgb.png") == img);

  Grid<std::uint8_t> gray(5, 9);
  for (auto& v : gray.values()) v = static_cast<std::uint8_t>(rng.below(256));
  write_png_gray(dir / "gray.png", gray);
  EXPECT_TRUE(read_png_channel(dir / "gray.png") == gray);

  Grid<std::uint8_t> idx(4, 4);
  for (auto& v : idx.values()) v = static_cast<std::uint8_t>(rng.below(3));
  write_png_indexed(dir / "idx.png", idx, {{0, 0, 0, 0}, {255, 191, 0, 255}, {255, 0, 0, 255}});
  EXPECT_TRUE(read_png_channel(dir / "idx.png") == idx);

  write_text_atomic(dir / "bad.png", "not a png");
  EXPECT_THROW(read_png_rgb(dir / "bad.png"), DecodeError);
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrowsLowestFailure) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);

  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 30 || i == 70) throw std::runtime_error(std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "30");
  }
}

}  // namespace
}  // namespace debris
