#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "debris/annotation/consensus.hpp"
#include "debris/cli/synthetic.hpp"
#include "debris/common/error.hpp"
#include "debris/common/files.hpp"
#include "debris/common/rng.hpp"
#include "debris/promptcraft/prompt.hpp"
#include "debris/segmodel/backend.hpp"
#include "debris/segmodel/decoder.hpp"
#include "debris/segmodel/multiclass.hpp"
#include "debris/trainer/config.hpp"
#include "debris/trainer/loss.hpp"
#include "debris/trainer/optimizer.hpp"
#include "debris/trainer/sampler.hpp"
#include "debris/trainer/trainer.hpp"
#include "support.hpp"

namespace debris::trainer {
namespace {

namespace fs = std::filesystem;
namespace ag = segmodel::ag;
using annotation::DenseMask;
using annotation::DensityLevel;
using promptcraft::EngineeredPrompt;
using promptcraft::PromptPool;

// ---------------------------------------------------------------- schedule

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 1000, 1e-3, 1e-4), 1e-3);
  EXPECT_DOUBLE_EQ(cosine_lr(1000, 1000, 1e-3, 1e-4), 1e-4);
  EXPECT_DOUBLE_EQ(cosine_lr(0, 1, 1e-3, 1e-4), 1e-3);
  EXPECT_DOUBLE_EQ(cosine_lr(1, 1, 1e-3, 1e-4), 1e-4);
}

TEST(CosineLr, Midpoint) {
  EXPECT_NEAR(cosine_lr(500, 1000, 1e-3, 1e-4), 5.5e-4, 1e-12);
  EXPECT_NEAR(cosine_lr(31, 62, 1e-3, 1e-4), 5.5e-4, 1e-12);
}

TEST(CosineLr, MonotoneAndBounded) {
  for (long total : {1L, 7L, 100L, 4000L}) {
    double previous = cosine_lr(0, total, 1e-3, 1e-4);
    for (long s = 0; s <= total; ++s) {
      const double lr = cosine_lr(s, total, 1e-3, 1e-4);
      EXPECT_GE(lr, 1e-4);
      EXPECT_LE(lr, 1e-3);
      EXPECT_LE(lr, previous);
      const long double oracle =
          1e-4L + 0.5L * (1e-3L - 1e-4L) * (1.0L + std::cos(std::numbers::pi_v<long double> * s / total));
      EXPECT_NEAR(lr, static_cast<double>(oracle), 1e-15);
      previous = lr;
    }
  }
}

TEST(CosineLr, DomainErrors) {
  EXPECT_THROW(cosine_lr(-1, 10, 1e-3, 1e-4), DomainError);
  EXPECT_THROW(cosine_lr(11, 10, 1e-3, 1e-4), DomainError);
  EXPECT_THROW(cosine_lr(0, 0, 1e-3, 1e-4), DomainError);
}

// ---------------------------------------------------------------- loss

segmodel::LogitMap constant_logits(int rows, int cols, double z) {
  return {Grid<double>(rows, cols, z), DensityLevel::kLowDensity};
}

TEST(BceLoss, SaturatedCorrect) {
  EXPECT_LT(bce_loss(constant_logits(4, 5, 20.0), BinaryMask(4, 5, 1)), 1e-8);
}

TEST(BceLoss, ZeroLogitsGiveLn2) {
  Rng rng(1);
  BinaryMask gt(6, 6);
  for (auto& v : gt.values()) v = rng.below(2);
  EXPECT_NEAR(bce_loss(constant_logits(6, 6, 0.0), gt), std::log(2.0), 1e-15);
}

TEST(BceLoss, SaturatedWrong) {
  const double expected = 20.0 + std::log1p(std::exp(-20.0));
  EXPECT_NEAR(bce_loss(constant_logits(3, 3, -20.0), BinaryMask(3, 3, 1)), expected, 1e-12);
}

TEST(BceLoss, MatchesHighPrecisionOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(64));
    std::vector<double> z(n);
    std::vector<std::uint8_t> y(n);
    long double oracle = 0.0L;
    for (int i = 0; i < n; ++i) {
      z[i] = rng.uniform(-15.0, 15.0);
      y[i] = rng.below(2);
      const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(z[i])));
      oracle -= y[i] ? std::log(s) : std::log(1.0L - s);
    }
    oracle /= n;
    const double loss = bce_loss(z, y);
    EXPECT_LE(std::abs(loss - static_cast<double>(oracle)), 1e-10 * static_cast<double>(oracle)) << trial;
  }
}

TEST(BceLoss, ShapeMismatch) {
  EXPECT_THROW(bce_loss(constant_logits(3, 3, 0.0), BinaryMask(3, 4, 0)), ShapeError);
  std::vector<double> z(3, 0.0);
  std::vector<std::uint8_t> y(4, 0);
  EXPECT_THROW(bce_loss(z, y), ShapeError);
}

// ---------------------------------------------------------------- optimizer

TEST(AdamW, MatchesHandComputedSteps) {
  std::vector<segmodel::NamedParameter> params;
  ag::Matrix w(1, 3);
  w << 0.5, -1.0, 2.0;
  params.push_back({"w", ag::parameter(w)});
  params.push_back({"unused", ag::parameter(ag::Matrix::Ones(1, 1))});
  const AdamWParams hp{0.9, 0.999, 1e-8, 0.01};
  AdamW opt(params, hp);

  const std::vector<std::array<double, 3>> grads = {{0.1, -0.2, 0.3}, {-0.05, 0.4, 0.0}};
  const std::vector<double> lrs = {1e-2, 5e-3};
  std::array<double, 3> theta{0.5, -1.0, 2.0}, m{}, v{};
  for (int t = 1; t <= 2; ++t) {
    ag::Matrix g(1, 3);
    g << grads[t - 1][0], grads[t - 1][1], grads[t - 1][2];
    params[0].var.node()->grad = g;
    params[1].var.zero_grad();
    opt.step(params, lrs[t - 1]);
    for (int i = 0; i < 3; ++i) {
      theta[i] -= lrs[t - 1] * hp.weight_decay * theta[i];
      m[i] = hp.beta1 * m[i] + (1 - hp.beta1) * grads[t - 1][i];
      v[i] = hp.beta2 * v[i] + (1 - hp.beta2) * grads[t - 1][i] * grads[t - 1][i];
      const double mhat = m[i] / (1 - std::pow(hp.beta1, t));
      const double vhat = v[i] / (1 - std::pow(hp.beta2, t));
      theta[i] -= lrs[t - 1] * mhat / (std::sqrt(vhat) + hp.eps);
      EXPECT_NEAR(params[0].var.value()(0, i), theta[i], 1e-15) << "step " << t << " index " << i;
    }
  }
  EXPECT_EQ(opt.step_count(), 2);
  EXPECT_EQ(params[1].var.value()(0, 0), 1.0);
}

// ---------------------------------------------------------------- fixtures

struct Fixture {
  std::vector<TrainItem> train, validation;
  PromptPool pools;
};

// 64 px separable scenes, 3/4 positive, pools engineered from the training
// items the same way the pipeline does.
Fixture make_fixture(int n_train, int n_val, std::uint64_t seed) {
  Rng rng(seed);
  const cli::SceneStyle style;
  Fixture f;
  auto make = [&](int i, const std::string& prefix) {
    cli::Scene s = cli::synthetic_scene(rng, style, i % 4 != 3);
    char id[32];
    std::snprintf(id, sizeof(id), "%s%03d", prefix.c_str(), i);
    return TrainItem{id, std::move(s.image), std::move(s.labels)};
  };
  for (int i = 0; i < n_train; ++i) f.train.push_back(make(i, "t"));
  for (int i = 0; i < n_val; ++i) f.validation.push_back(make(i, "v"));
  for (const auto& item : f.train) {
    if (!annotation::classify_positive(item.consensus)) {
      f.pools.pools[0].push_back({item.image, DensityLevel::kNoDebris, item.image_id});
      continue;
    }
    for (DensityLevel level : {DensityLevel::kLowDensity, DensityLevel::kHighDensity})
      if (auto p = promptcraft::engineer_prompt(item.image, item.consensus, level, 0.2, 5.0, item.image_id))
        f.pools.pools[annotation::to_int(level)].push_back(std::move(*p));
  }
  return f;
}

segmodel::MockBackend small_backend() { return segmodel::MockBackend({32, 3, 16, 0}); }

segmodel::DecoderConfig small_decoder_config() {
  segmodel::DecoderConfig c;
  c.token_dim = 32;
  c.n_heads = 2;
  c.ffn_dim = 32;
  c.extract_layers = {1, 2, 3};
  c.encoder_width = 32;
  return c;
}

TrainConfig small_train_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 8;
  c.checkpoint_every = 5;
  c.mixed_precision = false;
  c.seed = 7;
  return c;
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files[e.path().filename().string()] = read_file_bytes(e.path());
  return files;
}

// ---------------------------------------------------------------- sampler

TEST(Sampler, SameSeedSameBatch) {
  const Fixture f = make_fixture(8, 0, 1);
  Rng a(99), b(99);
  for (int round = 0; round < 5; ++round) {
    const auto x = sample_training_batch(f.train, f.pools, a, 16);
    const auto y = sample_training_batch(f.train, f.pools, b, 16);
    ASSERT_EQ(x.size(), 16u);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_EQ(x[i].query_image_id, y[i].query_image_id);
      EXPECT_EQ(x[i].level, y[i].level);
      EXPECT_EQ(x[i].visual_prompt_id, y[i].visual_prompt_id);
      EXPECT_EQ(x[i].alpha, y[i].alpha);
      EXPECT_EQ(x[i].gt_binary, y[i].gt_binary);
    }
  }
}

TEST(Sampler, SampleFieldsConsistent) {
  const Fixture f = make_fixture(8, 0, 2);
  Rng rng(5);
  for (const auto& s : sample_training_batch(f.train, f.pools, rng, 200)) {
    EXPECT_EQ(s.text_prompt, annotation::text_prompt(s.level));
    const auto& pool = f.pools[s.level];
    ASSERT_LT(s.visual_prompt_index, pool.size());
    EXPECT_EQ(pool[s.visual_prompt_index].source_image_id, s.visual_prompt_id);
    EXPECT_NE(s.visual_prompt_id, s.query_image_id);
    EXPECT_GE(s.alpha, 0.0);
    EXPECT_LE(s.alpha, 1.0);
    EXPECT_EQ(s.gt_binary, annotation::binarize(f.train[s.query_index].consensus, s.level));
  }
}

TEST(Sampler, LevelFrequenciesWithinThreeSigma) {
  const Fixture f = make_fixture(8, 0, 3);
  Rng rng(2024);
  const int n = 10000;
  std::array<int, 3> counts{};
  for (const auto& s : sample_training_batch(f.train, f.pools, rng, n)) ++counts[annotation::to_int(s.level)];
  const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (int c : counts) EXPECT_LE(std::abs(c - n / 3.0), 3 * sigma) << c;
}

TEST(Sampler, SelfExclusionWaivedForSoleMember) {
  Fixture f = make_fixture(8, 0, 4);
  // Leave the query as the only member of P2.
  const std::string query_id = f.pools.pools[2].front().source_image_id;
  f.pools.pools[2].resize(1);
  std::size_t qi = 0;
  while (f.train[qi].image_id != query_id) ++qi;
  Rng rng(6);
  int seen = 0;
  for (int i = 0; i < 300; ++i) {
    const auto s = draw_sample(f.train, qi, f.pools, rng, {0, 0, 1});
    ASSERT_EQ(s.level, DensityLevel::kHighDensity);
    EXPECT_EQ(s.visual_prompt_id, query_id);
    ++seen;
  }
  EXPECT_EQ(seen, 300);
}

TEST(Sampler, EmptyInputs) {
  Fixture f = make_fixture(4, 0, 5);
  Rng rng(1);
  EXPECT_THROW(sample_training_batch({}, f.pools, rng, 4), PreconditionError);
  f.pools.pools[1].clear();
  EXPECT_THROW(sample_training_batch(f.train, f.pools, rng, 4), PreconditionError);
}

// ---------------------------------------------------------------- selection

std::vector<CheckpointRecord> records_with(const std::vector<double>& dices) {
  std::vector<CheckpointRecord> out;
  for (std::size_t i = 0; i < dices.size(); ++i)
    out.push_back({static_cast<int>(i + 1), dices[i], "e" + std::to_string(i + 1), 0.0});
  return out;
}

TEST(SelectCheckpoint, Argmax) { EXPECT_EQ(select_checkpoint(records_with({0.2, 0.7, 0.5})).epoch, 2); }

TEST(SelectCheckpoint, TiesGoToEarliestEpoch) {
  EXPECT_EQ(select_checkpoint(records_with({0.4, 0.4, 0.4})).epoch, 1);
  EXPECT_EQ(select_checkpoint(records_with({0.1, 0.9, 0.3, 0.9})).epoch, 2);
}

TEST(SelectCheckpoint, SingleAndEmpty) {
  const auto one = records_with({0.3});
  EXPECT_EQ(select_checkpoint(one), one[0]);
  EXPECT_THROW(select_checkpoint({}), ContractError);
}

// ---------------------------------------------------------------- config

TEST(TrainConfigJson, RoundTripAndErrors) {
  TrainConfig c;
  c.batch_size = 3;
  c.epochs = 17;
  c.lr_start = 2e-3;
  c.lr_end = 3e-5;
  c.weight_decay = 0.5;
  c.seed = 12345678901234ULL;
  c.mixed_precision = false;
  c.level_weights = {1, 2, 3};
  c.checkpoint_every = 4;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<TrainConfig>(), c);
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<TrainConfig>(), c);

  nlohmann::json bad = j;
  bad["learning_rate"] = 1.0;
  EXPECT_THROW(bad.get<TrainConfig>(), ConfigError);
  TrainConfig inverted = c;
  inverted.lr_end = 1.0;
  EXPECT_THROW(inverted.validate(), ConfigError);
  TrainConfig no_batch = c;
  no_batch.batch_size = 0;
  EXPECT_THROW(no_batch.validate(), ConfigError);
}

// ---------------------------------------------------------------- training

TEST(Train, ZeroEpochsChangesNothing) {
  const Fixture f = make_fixture(4, 2, 6);
  const auto backend = small_backend();
  segmodel::Decoder decoder(small_decoder_config(), 1);
  const std::string before = decoder.weights_hash();
  testing::TempDir dir;
  const auto records =
      train(small_train_config(0), {f.train, f.validation}, f.pools, backend, decoder, {dir / "ckpt", false, 0});
  EXPECT_TRUE(records.empty());
  EXPECT_EQ(decoder.weights_hash(), before);
  EXPECT_FALSE(fs::exists(dir / "ckpt"));
}

TEST(Train, EmptySplitIsPrecondition) {
  const Fixture f = make_fixture(4, 2, 7);
  const auto backend = small_backend();
  segmodel::Decoder decoder(small_decoder_config(), 1);
  testing::TempDir dir;
  EXPECT_THROW(train(small_train_config(1), {{}, f.validation}, f.pools, backend, decoder, {dir / "c", false, 0}),
               PreconditionError);
  EXPECT_THROW(train(small_train_config(1), {f.train, {}}, f.pools, backend, decoder, {dir / "c", false, 0}),
               PreconditionError);
}

TEST(Train, NonFiniteLossAbortsWithContext) {
  const Fixture f = make_fixture(8, 2, 8);
  const auto backend = small_backend();
  segmodel::Decoder decoder(small_decoder_config(), 1);
  for (auto& p : decoder.parameters()) p.var.mutable_value().setConstant(std::nan(""));
  testing::TempDir dir;
  try {
    train(small_train_config(2), {f.train, f.validation}, f.pools, backend, decoder, {dir / "c", false, 0});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("epoch"), std::string::npos) << what;
    EXPECT_NE(what.find("batch"), std::string::npos) << what;
    EXPECT_NE(what.find("lr"), std::string::npos) << what;
  }
}

TEST(Train, ReproducibleAndEncoderFrozen) {
  const Fixture f = make_fixture(12, 4, 9);
  const auto backend = small_backend();
  const std::string encoder_before = backend.fingerprint();
  testing::TempDir dir;
  const fs::path ckpt = dir / "ckpt";

  std::vector<std::map<std::string, std::vector<std::uint8_t>>> runs;
  std::vector<std::vector<CheckpointRecord>> records;
  std::vector<std::string> hashes;
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(ckpt);
    segmodel::Decoder decoder(small_decoder_config(), 3);
    records.push_back(
        train(small_train_config(12), {f.train, f.validation}, f.pools, backend, decoder, {ckpt, false, 0}));
    hashes.push_back(decoder.weights_hash());
    runs.push_back(snapshot(ckpt));
  }
  EXPECT_EQ(backend.fingerprint(), encoder_before);
  EXPECT_EQ(records[0], records[1]);
  EXPECT_EQ(hashes[0], hashes[1]);
  ASSERT_EQ(runs[0].size(), runs[1].size());
  EXPECT_TRUE(runs[0].count("train_log.jsonl"));
  EXPECT_TRUE(runs[0].count("epoch_000012.ckpt"));
  for (const auto& [name, bytes] : runs[0]) EXPECT_EQ(bytes, runs[1][name]) << name;

  ASSERT_EQ(records[0].size(), 12u);
  for (int e = 0; e < 12; ++e) {
    EXPECT_EQ(records[0][e].epoch, e + 1);
    EXPECT_GE(records[0][e].val_debris_dice, 0.0);
    EXPECT_LE(records[0][e].val_debris_dice, 1.0);
  }
  // Persisted at the cadence, on improvement and at the end.
  EXPECT_FALSE(records[0][4].checkpoint_path.empty());
  EXPECT_FALSE(records[0][9].checkpoint_path.empty());
  EXPECT_FALSE(records[0][11].checkpoint_path.empty());
  const auto best = select_checkpoint(records[0]);
  EXPECT_FALSE(best.checkpoint_path.empty());
  EXPECT_EQ(read_best_marker(ckpt).epoch, best.epoch);
}

std::vector<nlohmann::json> step_lines(const fs::path& log) {
  std::vector<nlohmann::json> out;
  std::ifstream in(log);
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::json::parse(line);
    if (!j.contains("event")) out.push_back(std::move(j));
  }
  return out;
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const Fixture f = make_fixture(12, 4, 10);
  const auto backend = small_backend();
  testing::TempDir dir;
  const fs::path ckpt = dir / "ckpt";

  segmodel::Decoder full(small_decoder_config(), 4);
  const auto full_records =
      train(small_train_config(10), {f.train, f.validation}, f.pools, backend, full, {ckpt, false, 0});
  const auto full_files = snapshot(ckpt);
  const auto full_log = step_lines(ckpt / "train_log.jsonl");
  fs::remove_all(ckpt);

  segmodel::Decoder first(small_decoder_config(), 4);
  const auto partial =
      train(small_train_config(10), {f.train, f.validation}, f.pools, backend, first, {ckpt, false, 5});
  EXPECT_EQ(partial.size(), 5u);
  segmodel::Decoder second(small_decoder_config(), 99);  // overwritten by the resume
  const auto resumed =
      train(small_train_config(10), {f.train, f.validation}, f.pools, backend, second, {ckpt, true, 0});

  EXPECT_EQ(resumed, full_records);
  EXPECT_EQ(second.weights_hash(), full.weights_hash());
  EXPECT_EQ(read_file_bytes(ckpt / "epoch_000010.ckpt"), full_files.at("epoch_000010.ckpt"));
  EXPECT_EQ(step_lines(ckpt / "train_log.jsonl"), full_log);

  std::ifstream in(ckpt / "train_log.jsonl");
  bool saw_resume = false;
  for (std::string line; std::getline(in, line);)
    if (nlohmann::json::parse(line).value("event", "") == "resume") saw_resume = true;
  EXPECT_TRUE(saw_resume);
}

TEST(Train, OverfitsSeparableScenes) {
  const Fixture f = make_fixture(32, 8, 11);
  const auto backend = small_backend();
  const std::string encoder_before = backend.fingerprint();
  segmodel::Decoder decoder(small_decoder_config(), 0);
  testing::TempDir dir;
  TrainConfig config = small_train_config(200);
  config.checkpoint_every = 50;
  const auto records = train(config, {f.train, f.validation}, f.pools, backend, decoder, {dir / "c", false, 0});
  ASSERT_EQ(records.size(), 200u);
  EXPECT_EQ(backend.fingerprint(), encoder_before);

  const auto text = segmodel::text_conditions(backend);
  EXPECT_GT(debris_dice(decoder, backend, f.train, text), 0.9);

  // 50-epoch trailing moving average of the epoch loss.
  auto moving_average = [&](int epoch) {
    double sum = 0.0;
    int n = 0;
    for (int e = std::max(1, epoch - 49); e <= epoch; ++e, ++n) sum += records[e - 1].train_loss;
    return sum / n;
  };
  EXPECT_LT(moving_average(200), moving_average(10));
}

}  // namespace
}  // namespace debris::trainer
