#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace da3d {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes);
  ConfusionMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows);

  static ConfusionMatrix from_predictions(std::span<const int> labels,
                                          std::span<const int> predictions, int classes);

  int classes() const { return classes_; }
  std::int64_t& at(int truth, int predicted);
  std::int64_t at(int truth, int predicted) const;
  std::int64_t total() const;
  std::int64_t trace() const;

  // Same matrix with classes relabeled: new index = perm[old index].
  ConfusionMatrix permuted(std::span<const int> perm) const;

  std::string to_csv(const std::vector<std::string>& class_names = {}) const;

 private:
  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

double accuracy(const ConfusionMatrix& confusion);

struct F1Result {
  double macro = 0.0;
  std::vector<double> per_class;
  // Classes with no actual and no predicted samples; they count as F1 = 0.
  std::vector<int> empty_classes;
};

// Unweighted mean over classes of 2PR/(P+R).
F1Result macro_f1(const ConfusionMatrix& confusion);

// FN / (FN + TP) with `positive` as the disease/anomaly class.
double false_negative_rate(const ConfusionMatrix& confusion, int positive);
// FP / (FP + TN).
double false_positive_rate(const ConfusionMatrix& confusion, int positive);

// Mann-Whitney AUC with midranks for ties. `positive[i]` marks the positive
// class. Throws DataError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const bool> positive);

struct EvalReport {
  ConfusionMatrix confusion;
  std::int64_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<int> f1_empty_classes;
  int positive_class = 1;
  std::optional<double> auc;  // binary only, needs scores and both classes
  std::optional<double> fnr;  // binary only
  std::optional<double> fpr;  // binary only

  std::string to_json() const;
};

EvalReport report_from_confusion(const ConfusionMatrix& confusion, int positive_class);

// `scores` are positive-class probabilities; may be empty (no AUC).
EvalReport make_report(std::span<const int> labels, std::span<const int> predictions,
                       std::span<const double> scores, int classes, int positive_class);

}  // namespace da3d
