#pragma once

// Attention-pooled slice-bag classifier head.
//
//   scores      e_j  = w2 . tanh(W1 z_j)               (no biases)
//   attention   a    = softmax(e)
//   aggregate   z    = sum_j a_j z_j
//   head        u    = relu(Wh1 z + bh1)
//               h    = Wh2 u + bh2
//   normalized  h~   = h / |h|
//   logits      o    = Wc h + bc                        (classifier sees h, not h~)
//
// Everything is templated on the scalar so training runs in float and the
// gradient checks run in double.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "da3d/tensor.hpp"

namespace da3d {

struct ModelDims {
  int input_dim = 384;
  int attention_hidden = 128;
  int head_hidden = 256;
  int embedding_dim = 128;
  int num_classes = 2;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

template <typename T>
struct ModelParams {
  Mat<T> att_w1;   // attention_hidden x input_dim
  Vec<T> att_w2;   // attention_hidden
  Mat<T> head_w1;  // head_hidden x input_dim
  Vec<T> head_b1;  // head_hidden
  Mat<T> head_w2;  // embedding_dim x head_hidden
  Vec<T> head_b2;  // embedding_dim
  Mat<T> clf_w;    // num_classes x embedding_dim
  Vec<T> clf_b;    // num_classes

  static ModelParams zeros(const ModelDims& dims);

  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static ModelParams glorot(const ModelDims& dims, std::uint64_t seed);

  ModelDims dims() const;

  // Throws DataError when shapes disagree or an entry is non-finite.
  void validate() const;

  bool all_finite() const;
  std::size_t parameter_count() const;

  template <typename U>
  ModelParams<U> cast() const {
    return {att_w1.template cast<U>(), att_w2.template cast<U>(),
            head_w1.template cast<U>(), head_b1.template cast<U>(),
            head_w2.template cast<U>(), head_b2.template cast<U>(),
            clf_w.template cast<U>(),   clf_b.template cast<U>()};
  }

  ModelParams& operator+=(const ModelParams& other);
  bool operator==(const ModelParams& other) const;
};

// Calls fn(name, tensor_a, tensor_b, ...) for each field of the given
// parameter sets, in checkpoint serialization order.
template <typename F, typename... Params>
void for_each_tensor(F&& fn, Params&... params) {
  fn("attention.w1", params.att_w1...);
  fn("attention.w2", params.att_w2...);
  fn("head.w1", params.head_w1...);
  fn("head.b1", params.head_b1...);
  fn("head.w2", params.head_w2...);
  fn("head.b2", params.head_b2...);
  fn("classifier.w", params.clf_w...);
  fn("classifier.b", params.clf_b...);
}

// Gradients share the parameter layout.
template <typename T>
using GradientSet = ModelParams<T>;

template <typename T>
struct ForwardTrace {
  Vec<T> scores;              // N
  Vec<T> attention;           // N, on the simplex
  Mat<T> attention_hidden;    // N x attention_hidden, tanh(W1 z_j)
  Vec<T> aggregate;           // input_dim
  Vec<T> head_preact;         // head_hidden, before relu
  Vec<T> head_hidden;         // head_hidden, after relu and dropout mask
  Vec<T> dropout_mask;        // empty when no dropout was applied
  Vec<T> embedding;           // embedding_dim, unnormalized h
  T embedding_norm = T(0);
  Vec<T> normalized;          // embedding_dim, h / |h| or zero
  bool degenerate = false;    // |h| == 0; normalized is the zero vector
  Vec<T> logits;              // num_classes
};

template <typename T>
Vec<T> attention_scores(const Mat<T>& slices, const ModelParams<T>& params);

template <typename T>
Vec<T> attention_weights(const Vec<T>& scores);

template <typename T>
Vec<T> aggregate(const Mat<T>& slices, const Vec<T>& attention);

// `dropout_mask`, when non-empty, multiplies the head hidden activations
// (inverted dropout: entries are 0 or 1/(1-p)).
template <typename T>
ForwardTrace<T> forward(const Mat<T>& slices, const ModelParams<T>& params,
                        const Vec<T>& dropout_mask = Vec<T>());

// Exact gradient of a loss whose partial derivatives with respect to each
// sample's logits (row i of `logit_grads`) and normalized embedding (row i of
// `normalized_grads`) are given. Contributions are summed in sample order.
template <typename T>
GradientSet<T> backward(std::span<const ForwardTrace<T>> traces,
                        std::span<const Mat<T>* const> slices,
                        const ModelParams<T>& params,
                        const Mat<T>& logit_grads,
                        const Mat<T>& normalized_grads);

// Index of the largest logit; ties go to the lower index.
template <typename T>
int predict_class(const Vec<T>& logits);

}  // namespace da3d
