#include "da3d/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "da3d/evaluation.hpp"
#include "da3d/parallel.hpp"
#include "json.hpp"

namespace da3d {

namespace {

// Slice matrices in the working precision. Float reads the store directly;
// double keeps converted copies.
template <typename T>
class SliceSource {
 public:
  SliceSource(const BagStore& store, const std::vector<std::string>& ids) : store_(store) {
    if constexpr (!std::is_same_v<T, float>) {
      for (const auto& id : ids) converted_.emplace(id, store.get(id).slices.template cast<T>());
    }
  }

  const Mat<T>& get(const std::string& id) const {
    if constexpr (std::is_same_v<T, float>) {
      return store_.get(id).slices;
    } else {
      const auto it = converted_.find(id);
      if (it == converted_.end()) throw DataError("no bag loaded for id '" + id + "'");
      return it->second;
    }
  }

 private:
  const BagStore& store_;
  std::map<std::string, Mat<T>> converted_;
};

template <typename T>
struct BatchPass {
  std::vector<ForwardTrace<T>> traces;
  std::vector<const Mat<T>*> slices;
  BatchViews<T> views;
};

template <typename T>
BatchPass<T> run_forward(const ModelParams<T>& params, const std::vector<std::string>& ids,
                         const SliceSource<T>& source, const BagStore& store,
                         const std::vector<Vec<T>>& masks) {
  BatchPass<T> pass;
  const std::size_t b = ids.size();
  pass.traces.resize(b);
  pass.slices.resize(b);
  for (std::size_t i = 0; i < b; ++i) pass.slices[i] = &source.get(ids[i]);
  parallel_for(b, [&](std::size_t i) {
    pass.traces[i] = forward<T>(*pass.slices[i], params, masks.empty() ? Vec<T>() : masks[i]);
  });

  const ModelDims d = params.dims();
  auto& v = pass.views;
  v.logits.resize(static_cast<Eigen::Index>(b), d.num_classes);
  v.normalized.resize(static_cast<Eigen::Index>(b), d.embedding_dim);
  v.labels.resize(b);
  v.degenerate.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    v.logits.row(row) = pass.traces[i].logits.transpose();
    v.normalized.row(row) = pass.traces[i].normalized.transpose();
    v.labels[i] = store.get(ids[i]).label;
    v.degenerate[i] = pass.traces[i].degenerate;
  }
  return pass;
}

template <typename T>
LossBreakdown<double> widen(const LossBreakdown<T>& l) {
  return {static_cast<double>(l.ce), static_cast<double>(l.contra), static_cast<double>(l.var),
          static_cast<double>(l.total), l.tau, l.lambda};
}

bool finite(const LossBreakdown<double>& l) {
  return std::isfinite(l.ce) && std::isfinite(l.contra) && std::isfinite(l.var) &&
         std::isfinite(l.total);
}

std::string id_list(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ",") + id;
  return out;
}

template <typename T>
SetLoss set_loss_impl(const ModelParams<T>& params, const std::vector<std::string>& ids,
                      const SliceSource<T>& source, const BagStore& store,
                      const TrainConfig& config) {
  const auto pass = run_forward<T>(params, ids, source, store, {});
  const auto result = total_loss<T>(pass.views, config.objective());
  SetLoss out;
  out.loss = widen(result.loss);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (predict_class<T>(pass.traces[i].logits) == pass.views.labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(ids.size());
  return out;
}

template <typename T>
TrainResult train_impl(const TrainConfig& config, const std::vector<std::string>& train_ids,
                       const std::vector<std::string>& val_ids, const BagStore& store) {
  using Clock = std::chrono::steady_clock;
  const ModelDims dims = config.dims(store.dim());
  std::vector<std::string> all_ids = train_ids;
  all_ids.insert(all_ids.end(), val_ids.begin(), val_ids.end());
  const SliceSource<T> source(store, all_ids);

  std::vector<int> labels;
  labels.reserve(train_ids.size());
  for (const auto& id : train_ids) labels.push_back(store.get(id).label);

  ModelParams<T> params = ModelParams<T>::glorot(dims, config.seed);
  AdamState<T> adam = AdamState<T>::zeros(dims);
  const OptimizerHyper hyper = config.optimizer_hyper();
  const ObjectiveConfig objective = config.objective();
  Rng shuffle_rng = make_rng(config.seed, "shuffle");
  Rng dropout_rng = make_rng(config.seed, "dropout");

  TrainResult out;
  out.best = params.template cast<float>();
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = Clock::now();
    double lr = config.learning_rate;
    if (config.cosine_decay) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / config.epochs));
    }

    const auto batches = make_batches(train_ids.size(), config.batch_size, shuffle_rng, labels,
                                      config.stratified_batches);
    LossBreakdown<double> sum{0, 0, 0, 0, config.tau, config.lambda};
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<std::string> ids;
      ids.reserve(batches[bi].size());
      for (auto k : batches[bi]) ids.push_back(train_ids[k]);

      std::vector<Vec<T>> masks;
      if (config.dropout > 0) {
        std::bernoulli_distribution keep(1.0 - config.dropout);
        const T scale = static_cast<T>(1.0 / (1.0 - config.dropout));
        masks.resize(ids.size());
        for (auto& m : masks) {
          m.resize(dims.head_hidden);
          for (Eigen::Index j = 0; j < m.size(); ++j) m[j] = keep(dropout_rng) ? scale : T(0);
        }
      }

      const auto pass = run_forward<T>(params, ids, source, store, masks);
      const auto result = total_loss<T>(pass.views, objective);
      const auto loss = widen(result.loss);
      if (!finite(loss)) {
        std::cerr << "divergence at epoch " << epoch << " batch " << bi << ": ids "
                  << id_list(ids) << '\n';
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(bi) + " (ids " + id_list(ids) + ")");
      }
      out.degenerate_samples += static_cast<int>(
          std::count(pass.views.degenerate.begin(), pass.views.degenerate.end(), true));

      const auto grads = backward<T>(pass.traces, pass.slices, params, result.logit_grad,
                                     result.normalized_grad);
      if (config.optimizer == OptimizerKind::Adam) {
        adam_step<T>(params, grads, adam, hyper, lr);
      } else {
        sgd_step<T>(params, grads, hyper, lr);
      }
      sum.ce += loss.ce;
      sum.contra += loss.contra;
      sum.var += loss.var;
      sum.total += loss.total;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const double nb = static_cast<double>(batches.size());
    rec.train = {sum.ce / nb, sum.contra / nb, sum.var / nb, sum.total / nb, config.tau,
                 config.lambda};
    const SetLoss val = set_loss_impl<T>(params, val_ids, source, store, config);
    if (!finite(val.loss)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.val = val.loss;
    rec.val_accuracy = val.accuracy;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.history.epochs.push_back(rec);

    if (rec.val.total < best_val) {
      best_val = rec.val.total;
      out.best = params.template cast<float>();
      out.history.best_epoch = epoch;
      out.history.best_val_total = best_val;
    }
    if (config.log_every > 0 && (epoch + 1) % config.log_every == 0) {
      std::cerr << "epoch " << epoch << " train " << rec.train.total << " (ce " << rec.train.ce
                << " contra " << rec.train.contra << " var " << rec.train.var << ") val "
                << rec.val.total << " acc " << rec.val_accuracy << '\n';
    }
  }
  out.final = params.template cast<float>();
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (epochs < 1) fail("epochs must be positive");
  if (batch_size < 2) fail("batch_size must be at least 2");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0, 1)");
  if (!(epsilon > 0)) fail("epsilon must be positive");
  if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
  if (!(dropout >= 0 && dropout < 1)) fail("dropout must lie in [0, 1)");
  if (!(lambda >= 0)) fail("lambda must be >= 0");
  if (!(tau > 0)) fail("tau must be positive");
  if (attention_hidden < 1 || head_hidden < 1 || embedding_dim < 1) fail("layer sizes must be positive");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (log_every < 0) fail("log_every must be >= 0");
}

ModelDims TrainConfig::dims(int input_dim) const {
  ModelDims d{input_dim, attention_hidden, head_hidden, embedding_dim, num_classes};
  d.validate();
  return d;
}

ObjectiveConfig TrainConfig::objective() const {
  return {tau, lambda, variance_global_classes, num_classes};
}

OptimizerHyper TrainConfig::optimizer_hyper() const {
  return {optimizer, learning_rate, beta1, beta2, epsilon, weight_decay};
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["optimizer"] = optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  j["weight_decay"] = weight_decay;
  j["dropout"] = dropout;
  j["lambda"] = lambda;
  j["tau"] = tau;
  j["attention_hidden"] = attention_hidden;
  j["head_hidden"] = head_hidden;
  j["embedding_dim"] = embedding_dim;
  j["num_classes"] = num_classes;
  j["seed"] = seed;
  j["double_precision"] = double_precision;
  j["stratified_batches"] = stratified_batches;
  j["cosine_decay"] = cosine_decay;
  j["variance_global_classes"] = variance_global_classes;
  return j.dump();
}

std::string TrainHistory::to_jsonl(bool wallclock) const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["ce"] = e.train.ce;
    j["contra"] = e.train.contra;
    j["var"] = e.train.var;
    j["total"] = e.train.total;
    j["val_total"] = e.val.total;
    j["val_acc"] = e.val_accuracy;
    j["seconds"] = wallclock ? e.seconds : 0.0;
    out += j.dump();
    out += '\n';
  }
  return out;
}

ModelParams<float> initial_params(const TrainConfig& config, int input_dim) {
  const ModelDims dims = config.dims(input_dim);
  if (config.double_precision) return ModelParams<double>::glorot(dims, config.seed).cast<float>();
  return ModelParams<float>::glorot(dims, config.seed);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng,
                                                   const std::vector<int>& labels,
                                                   bool stratified) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (n < 2) throw DataError("training needs at least 2 samples");
  std::vector<std::size_t> order;
  order.reserve(n);
  if (stratified) {
    if (labels.size() != n) throw DataError("stratified batching needs one label per sample");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    for (auto& [cls, members] : by_class) std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t round = 0; order.size() < n; ++round) {
      for (auto& [cls, members] : by_class) {
        if (round < members.size()) order.push_back(members[round]);
      }
    }
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::vector<std::size_t>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += b) {
    const std::size_t end = std::min(n, start + b);
    if (end - start == 1 && !batches.empty()) {
      batches.back().push_back(order[start]);
    } else {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return batches;
}

SetLoss set_loss(const ModelParams<float>& params, const std::vector<std::string>& ids,
                 const BagStore& store, const TrainConfig& config) {
  if (ids.empty()) throw DataError("loss over an empty id set");
  if (config.double_precision) {
    const SliceSource<double> source(store, ids);
    return set_loss_impl<double>(params.cast<double>(), ids, source, store, config);
  }
  const SliceSource<float> source(store, ids);
  return set_loss_impl<float>(params, ids, source, store, config);
}

TrainResult train(const TrainConfig& config, const std::vector<std::string>& train_ids,
                  const std::vector<std::string>& val_ids, const BagStore& store) {
  config.validate();
  if (train_ids.size() < 2) throw DataError("training needs at least 2 samples");
  if (val_ids.empty()) throw DataError("model selection needs a non-empty validation set");
  for (const auto* ids : {&train_ids, &val_ids}) {
    for (const auto& id : *ids) {
      const int label = store.get(id).label;
      if (label < 0 || label >= config.num_classes) {
        throw DataError("id '" + id + "' has label " + std::to_string(label) + " outside [0, " +
                        std::to_string(config.num_classes) + ")");
      }
    }
  }
  if (config.double_precision) return train_impl<double>(config, train_ids, val_ids, store);
  return train_impl<float>(config, train_ids, val_ids, store);
}

std::string KFoldReport::to_json() const {
  nlohmann::ordered_json j;
  auto summary = [](const MetricSummary& s) {
    nlohmann::ordered_json o;
    o["accuracy"] = s.accuracy;
    o["auc"] = s.auc;
    o["macro_f1"] = s.macro_f1;
    o["fnr"] = s.fnr;
    return o;
  };
  j["k"] = folds.size();
  j["mean"] = summary(mean);
  j["stddev"] = summary(stddev);
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto o = nlohmann::ordered_json::parse(folds[f].to_json());
    o["fold"] = f;
    o["best_epoch"] = f < histories.size() ? histories[f].best_epoch : -1;
    arr.push_back(o);
  }
  j["folds"] = arr;
  return j.dump(2);
}

KFoldReport run_kfold(const TrainConfig& config, const SplitAssignment& split,
                      const BagStore& store, int positive_class) {
  if (!split.is_kfold()) throw DataError("run_kfold needs a k-fold assignment");
  KFoldReport report;
  for (int f = 0; f < split.fold_count(); ++f) {
    TrainConfig fold_config = config;
    fold_config.seed = config.seed + static_cast<std::uint64_t>(f);
    const TrainResult result = train(fold_config, split.fold_train(f), split.val, store);
    const EvalResult eval = evaluate(result.best, split.fold_test(f), store, positive_class);
    report.folds.push_back(eval.report);
    report.histories.push_back(result.history);
    report.models.push_back(result.best);
  }

  const double k = static_cast<double>(report.folds.size());
  auto field = [](const EvalReport& r, int which) {
    switch (which) {
      case 0: return r.accuracy;
      case 1: return r.auc.value_or(std::numeric_limits<double>::quiet_NaN());
      case 2: return r.macro_f1;
      default: return r.fnr.value_or(std::numeric_limits<double>::quiet_NaN());
    }
  };
  double* mean_fields[] = {&report.mean.accuracy, &report.mean.auc, &report.mean.macro_f1,
                           &report.mean.fnr};
  double* sd_fields[] = {&report.stddev.accuracy, &report.stddev.auc, &report.stddev.macro_f1,
                         &report.stddev.fnr};
  for (int w = 0; w < 4; ++w) {
    double sum = 0.0;
    for (const auto& r : report.folds) sum += field(r, w);
    const double mean = sum / k;
    double sq = 0.0;
    for (const auto& r : report.folds) sq += (field(r, w) - mean) * (field(r, w) - mean);
    *mean_fields[w] = mean;
    *sd_fields[w] = std::sqrt(sq / k);
  }
  return report;
}

}  // namespace da3d
