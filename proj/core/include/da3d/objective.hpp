#pragma once

// Composite training objective over a batch:
//   total = cross_entropy + contrastive + lambda * variance

#include <vector>

#include "da3d/tensor.hpp"

namespace da3d {

template <typename T>
struct LossValue {
  T value = T(0);
  Mat<T> grad;  // same shape as the input
};

template <typename T>
struct BatchViews {
  Mat<T> logits;                  // B x C
  Mat<T> normalized;              // B x m
  std::vector<int> labels;        // B
  std::vector<bool> degenerate;   // B; empty means none degenerate
};

struct ObjectiveConfig {
  double tau = 0.07;
  double lambda = 0.1;
  // When true the variance term divides by `num_classes` instead of the
  // number of classes present in the batch.
  bool variance_global_classes = false;
  int num_classes = 2;
};

template <typename T>
struct LossBreakdown {
  T ce = T(0);
  T contra = T(0);
  T var = T(0);
  T total = T(0);
  double tau = 0.07;
  double lambda = 0.1;
};

template <typename T>
struct ObjectiveResult {
  LossBreakdown<T> loss;
  Mat<T> logit_grad;       // B x C
  Mat<T> normalized_grad;  // B x m
};

// Mean over the batch of -log softmax(o_i)[y_i].
template <typename T>
LossValue<T> cross_entropy(const Mat<T>& logits, const std::vector<int>& labels);

// Supervised contrastive loss with similarities s_ij = h_i . h_j / tau.
// For each sample i with a non-empty positive set P(i):
//   l_i = -(1/|P(i)|) sum_{j in P(i)} log( exp(s_ij) / sum_{k != i} exp(s_ik) )
// and the loss is (1/B) sum_i l_i. Samples with no positives contribute 0.
// Degenerate rows are dropped from every set but still count in B.
template <typename T>
LossValue<T> contrastive(const Mat<T>& normalized, const std::vector<int>& labels,
                         double tau, const std::vector<bool>& degenerate = {});

// (1/C) sum_c (1/|I_c|) sum_{i in I_c} |h_i - mean_c|^2, where C counts the
// classes present (or `global_classes` when positive).
template <typename T>
LossValue<T> variance(const Mat<T>& normalized, const std::vector<int>& labels,
                      const std::vector<bool>& degenerate = {}, int global_classes = 0);

template <typename T>
ObjectiveResult<T> total_loss(const BatchViews<T>& views, const ObjectiveConfig& config);

}  // namespace da3d
