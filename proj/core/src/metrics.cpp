#include "da3d/metrics.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <sstream>

#include "da3d/errors.hpp"
#include "json.hpp"

namespace da3d {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {
  if (classes < 1) throw DataError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows)
    : ConfusionMatrix(static_cast<int>(rows.size())) {
  int r = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != classes_) throw DataError("confusion matrix must be square");
    int c = 0;
    for (auto v : row) at(r, c++) = v;
    ++r;
  }
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> labels,
                                                  std::span<const int> predictions, int classes) {
  if (labels.size() != predictions.size()) throw DataError("labels and predictions differ in length");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) ++m.at(labels[i], predictions[i]);
  return m;
}

std::int64_t& ConfusionMatrix::at(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw DataError("confusion index out of range");
  }
  return counts_[static_cast<std::size_t>(truth) * classes_ + predicted];
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  return const_cast<ConfusionMatrix*>(this)->at(truth, predicted);
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int c = 0; c < classes_; ++c) t += at(c, c);
  return t;
}

ConfusionMatrix ConfusionMatrix::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != classes_) throw DataError("permutation size mismatch");
  ConfusionMatrix out(classes_);
  for (int r = 0; r < classes_; ++r) {
    for (int c = 0; c < classes_; ++c) out.at(perm[r], perm[c]) = at(r, c);
  }
  return out;
}

std::string ConfusionMatrix::to_csv(const std::vector<std::string>& class_names) const {
  auto name = [&](int c) {
    return c < static_cast<int>(class_names.size()) ? class_names[c] : std::to_string(c);
  };
  std::ostringstream os;
  os << "true\\pred";
  for (int c = 0; c < classes_; ++c) os << ',' << name(c);
  os << '\n';
  for (int r = 0; r < classes_; ++r) {
    os << name(r);
    for (int c = 0; c < classes_; ++c) os << ',' << at(r, c);
    os << '\n';
  }
  return os.str();
}

double accuracy(const ConfusionMatrix& confusion) {
  const auto n = confusion.total();
  if (n == 0) throw DataError("accuracy of an empty prediction set");
  return static_cast<double>(confusion.trace()) / static_cast<double>(n);
}

F1Result macro_f1(const ConfusionMatrix& confusion) {
  if (confusion.total() == 0) throw DataError("F1 of an empty prediction set");
  F1Result out;
  const int k = confusion.classes();
  for (int c = 0; c < k; ++c) {
    std::int64_t actual = 0;
    std::int64_t predicted = 0;
    for (int j = 0; j < k; ++j) {
      actual += confusion.at(c, j);
      predicted += confusion.at(j, c);
    }
    const std::int64_t tp = confusion.at(c, c);
    // 2PR/(P+R) == 2TP / (actual + predicted)
    double f1 = 0.0;
    if (actual + predicted == 0) {
      out.empty_classes.push_back(c);
    } else {
      f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(actual + predicted);
    }
    out.per_class.push_back(f1);
  }
  out.macro = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / k;
  return out;
}

double false_negative_rate(const ConfusionMatrix& confusion, int positive) {
  if (confusion.classes() != 2) throw DataError("FNR is defined for binary tasks only");
  const std::int64_t tp = confusion.at(positive, positive);
  const std::int64_t fn = confusion.at(positive, 1 - positive);
  if (tp + fn == 0) throw DataError("FNR undefined without positive samples");
  return static_cast<double>(fn) / static_cast<double>(fn + tp);
}

double false_positive_rate(const ConfusionMatrix& confusion, int positive) {
  return false_negative_rate(confusion, 1 - positive);
}

double roc_auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw DataError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks (1-based) of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t t = lo; t <= hi; ++t) {
      if (positive[order[t]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    lo = hi + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC needs both classes present");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

EvalReport report_from_confusion(const ConfusionMatrix& confusion, int positive_class) {
  EvalReport r;
  r.confusion = confusion;
  r.n = confusion.total();
  r.accuracy = accuracy(confusion);
  const F1Result f1 = macro_f1(confusion);
  r.macro_f1 = f1.macro;
  r.per_class_f1 = f1.per_class;
  r.f1_empty_classes = f1.empty_classes;
  r.positive_class = positive_class;
  if (confusion.classes() == 2) {
    std::int64_t pos = confusion.at(positive_class, 0) + confusion.at(positive_class, 1);
    std::int64_t neg = r.n - pos;
    if (pos > 0) r.fnr = false_negative_rate(confusion, positive_class);
    if (neg > 0) r.fpr = false_positive_rate(confusion, positive_class);
  }
  return r;
}

EvalReport make_report(std::span<const int> labels, std::span<const int> predictions,
                       std::span<const double> scores, int classes, int positive_class) {
  EvalReport r = report_from_confusion(
      ConfusionMatrix::from_predictions(labels, predictions, classes), positive_class);
  if (classes == 2 && !scores.empty() && r.fnr && r.fpr) {
    std::unique_ptr<bool[]> pos(new bool[labels.size()]);
    for (std::size_t i = 0; i < labels.size(); ++i) pos[i] = labels[i] == positive_class;
    r.auc = roc_auc(scores, std::span<const bool>(pos.get(), labels.size()));
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  j["per_class_f1"] = per_class_f1;
  j["f1_empty_classes"] = f1_empty_classes;
  j["positive_class"] = positive_class;
  j["auc"] = auc ? nlohmann::ordered_json(*auc) : nlohmann::ordered_json(nullptr);
  j["fnr"] = fnr ? nlohmann::ordered_json(*fnr) : nlohmann::ordered_json(nullptr);
  j["fpr"] = fpr ? nlohmann::ordered_json(*fpr) : nlohmann::ordered_json(nullptr);
  auto rows = nlohmann::ordered_json::array();
  for (int r = 0; r < confusion.classes(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (int c = 0; c < confusion.classes(); ++c) row.push_back(confusion.at(r, c));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2);
}

}  // namespace da3d
