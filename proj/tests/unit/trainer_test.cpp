#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "da3d/errors.hpp"
#include "da3d/rng.hpp"
#include "da3d/split.hpp"
#include "da3d/trainer.hpp"

namespace da3d {
namespace {

// Two classes told apart by the sign of coordinate 0 in every slice.
struct Dataset {
  BagStore store;
  Manifest manifest;
  std::vector<std::string> ids;
};

Dataset separable(int per_class, int d = 6, std::uint64_t seed = 1, double gap = 3.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Dataset out;
  std::vector<ManifestEntry> entries;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      SliceBag bag;
      bag.subject_id = "c" + std::to_string(c) + "_" + std::to_string(i);
      bag.label = c;
      const int n = 2 + i % 5;
      bag.slices.resize(n, d);
      for (Eigen::Index k = 0; k < bag.slices.size(); ++k) bag.slices.data()[k] = normal(rng);
      bag.slices.col(0).array() += static_cast<float>(c == 0 ? -gap : gap);
      out.ids.push_back(bag.subject_id);
      entries.push_back({bag.subject_id, bag.subject_id + ".da3d", "c" + std::to_string(c), {}, {}, {}});
      out.store.add(std::move(bag));
    }
  }
  out.manifest = Manifest(std::move(entries));
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.attention_hidden = 8;
  c.head_hidden = 12;
  c.embedding_dim = 6;
  c.epochs = 8;
  c.batch_size = 8;
  c.learning_rate = 1e-3;
  c.seed = 7;
  return c;
}

TEST(Batches, RemainderRule) {
  Rng rng = make_rng(1, "shuffle");
  for (std::size_t n = 2; n <= 70; ++n) {
    for (int b : {2, 3, 4, 16}) {
      const auto batches = make_batches(n, b, rng);
      std::vector<std::size_t> seen;
      for (std::size_t i = 0; i < batches.size(); ++i) {
        const auto size = batches[i].size();
        if (i + 1 < batches.size()) {
          ASSERT_EQ(size, static_cast<std::size_t>(b));
        } else {
          ASSERT_GE(size, 2u);
          ASSERT_LE(size, static_cast<std::size_t>(b) + 1);
        }
        seen.insert(seen.end(), batches[i].begin(), batches[i].end());
      }
      std::sort(seen.begin(), seen.end());
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      ASSERT_EQ(seen, all);
      const std::size_t rem = n % static_cast<std::size_t>(b);
      if (rem == 1 && n > 1) {
        ASSERT_EQ(batches.back().size(), static_cast<std::size_t>(b) + 1);
      }
    }
  }
}

TEST(Batches, StratifiedBatchesMixClasses) {
  Rng rng = make_rng(2, "shuffle");
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 20 ? 0 : 1;
  for (const auto& batch : make_batches(40, 8, rng, labels, true)) {
    std::set<int> classes;
    for (auto i : batch) classes.insert(labels[i]);
    EXPECT_EQ(classes.size(), 2u);
  }
}

TEST(Train, ZeroLearningRateKeepsInitialParams) {
  const auto data = separable(12);
  auto cfg = small_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 4;
  const std::vector<std::string> train_ids(data.ids.begin(), data.ids.begin() + 8);
  std::vector<std::string> rest(data.ids.begin() + 12, data.ids.begin() + 20);
  const auto r = train(cfg, rest, {data.ids[0], data.ids[13]}, data.store);
  EXPECT_EQ(r.final, initial_params(cfg, data.store.dim()));
  EXPECT_EQ(r.best, r.final);
  for (const auto& e : r.history.epochs) {
    EXPECT_EQ(e.val.total, r.history.epochs.front().val.total);
  }
  EXPECT_EQ(r.history.best_epoch, r.history.epochs.front().epoch);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto data = separable(16);
  const auto s = make_split(data.manifest, {}, 3);
  const auto a = train(small_config(), s.train, s.val, data.store);
  const auto b = train(small_config(), s.train, s.val, data.store);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.final, b.final);
  EXPECT_EQ(a.history.to_jsonl(false), b.history.to_jsonl(false));
  auto other = small_config();
  other.seed = 8;
  EXPECT_FALSE(train(other, s.train, s.val, data.store).final == a.final);
}

TEST(Train, BestCheckpointReproducesItsValidationLoss) {
  const auto data = separable(20);
  const auto s = make_split(data.manifest, {}, 4);
  auto cfg = small_config();
  cfg.epochs = 12;
  const auto r = train(cfg, s.train, s.val, data.store);
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& e : r.history.epochs) lowest = std::min(lowest, e.val.total);
  EXPECT_NEAR(r.history.best_val_total, lowest, 1e-9);
  const auto& best = r.history.epochs[static_cast<std::size_t>(r.history.best_epoch - r.history.epochs.front().epoch)];
  EXPECT_EQ(best.val.total, lowest);
  // Earliest epoch among ties.
  for (const auto& e : r.history.epochs) {
    if (e.epoch < r.history.best_epoch) {
      EXPECT_GT(e.val.total, lowest);
    }
  }
  EXPECT_NEAR(set_loss(r.best, s.val, data.store, cfg).loss.total, r.history.best_val_total, 1e-9);
}

TEST(Train, HistoryLinesHaveFixedKeys) {
  const auto data = separable(10);
  const auto s = make_split(data.manifest, {}, 5);
  auto cfg = small_config();
  cfg.epochs = 2;
  const std::string log = train(cfg, s.train, s.val, data.store).history.to_jsonl(false);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  for (const char* key : {"\"epoch\"", "\"ce\"", "\"contra\"", "\"var\"", "\"total\"",
                          "\"val_total\"", "\"val_acc\"", "\"seconds\""}) {
    EXPECT_NE(log.find(key), std::string::npos) << key;
  }
}

TEST(Train, RejectsBadInputs) {
  const auto data = separable(10);
  EXPECT_THROW(train(small_config(), {data.ids[0]}, {data.ids[1]}, data.store), DataError);
  EXPECT_THROW(train(small_config(), {data.ids[0], data.ids[1]}, {}, data.store), DataError);
  auto cfg = small_config();
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Train, DivergenceIsReported) {
  const auto data = separable(10);
  const auto s = make_split(data.manifest, {}, 6);
  auto cfg = small_config();
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 1e30;
  try {
    train(cfg, s.train, s.val, data.store);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(KFold, SeparableDataGivesPerfectMeanAccuracy) {
  const auto data = separable(30, 6, 11, 4.0);
  const auto split = make_kfold(data.manifest, 5, 5, 2);
  auto cfg = small_config();
  cfg.epochs = 30;
  cfg.learning_rate = 1e-2;
  const auto report = run_kfold(cfg, split, data.store, 1);
  ASSERT_EQ(report.folds.size(), 5u);
  ASSERT_EQ(report.models.size(), 5u);
  double sum = 0;
  for (const auto& f : report.folds) sum += f.accuracy;
  EXPECT_NEAR(report.mean.accuracy, sum / 5, 1e-9);
  EXPECT_EQ(report.mean.accuracy, 1.0);
  EXPECT_NE(report.to_json().find("\"folds\""), std::string::npos);
}

}  // namespace
}  // namespace da3d
