#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "da3d/model.hpp"
#include "da3d/objective.hpp"

namespace {

using namespace da3d;

const ModelDims kDims{};  // 384 -> 256 -> 128, attention 128

Mat<float> random_bag(std::mt19937_64& rng, int n) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Mat<float> z(n, kDims.input_dim);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  return z;
}

void BM_Forward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto params = ModelParams<float>::glorot(kDims, 1);
  const auto bag = random_bag(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward<float>(bag, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(160);

// One training batch: forward, loss and backward for B bags of N slices.
void BM_TrainStep(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto params = ModelParams<float>::glorot(kDims, 2);
  const int batch = static_cast<int>(state.range(0));
  std::vector<Mat<float>> bags;
  std::vector<const Mat<float>*> slices;
  BatchViews<float> views;
  for (int i = 0; i < batch; ++i) {
    bags.push_back(random_bag(rng, 64));
    views.labels.push_back(i % 2);
  }
  for (const auto& b : bags) slices.push_back(&b);
  views.logits.resize(batch, kDims.num_classes);
  views.normalized.resize(batch, kDims.embedding_dim);
  for (auto _ : state) {
    std::vector<ForwardTrace<float>> traces;
    views.degenerate.clear();
    for (int i = 0; i < batch; ++i) {
      traces.push_back(forward<float>(bags[static_cast<std::size_t>(i)], params));
      views.logits.row(i) = traces.back().logits.transpose();
      views.normalized.row(i) = traces.back().normalized.transpose();
      views.degenerate.push_back(traces.back().degenerate);
    }
    const auto loss = total_loss(views, ObjectiveConfig{});
    benchmark::DoNotOptimize(
        backward<float>(traces, slices, params, loss.logit_grad, loss.normalized_grad));
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64);

void BM_TotalLoss(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const int batch = static_cast<int>(state.range(0));
  BatchViews<float> views;
  views.logits = Mat<float>::Random(batch, 2);
  views.normalized.resize(batch, kDims.embedding_dim);
  for (Eigen::Index i = 0; i < views.normalized.size(); ++i) views.normalized.data()[i] = normal(rng);
  views.normalized.rowwise().normalize();
  for (int i = 0; i < batch; ++i) views.labels.push_back(i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(views, ObjectiveConfig{}));
}
BENCHMARK(BM_TotalLoss)->Arg(16)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
