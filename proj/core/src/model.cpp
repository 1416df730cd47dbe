#include "da3d/model.hpp"

#include <cmath>
#include <random>

#include "da3d/errors.hpp"
#include "da3d/rng.hpp"

namespace da3d {

namespace {

std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DataError("dimension mismatch: " + what);
}

template <typename T, typename Tensor>
void glorot_fill(Tensor& t, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(dist(rng));
}

}  // namespace

void ModelDims::validate() const {
  if (input_dim < 1 || attention_hidden < 1 || head_hidden < 1 || embedding_dim < 1 ||
      num_classes < 2) {
    throw ConfigError("model dimensions must be positive with at least 2 classes");
  }
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelDims& d) {
  d.validate();
  return {Mat<T>::Zero(d.attention_hidden, d.input_dim),
          Vec<T>::Zero(d.attention_hidden),
          Mat<T>::Zero(d.head_hidden, d.input_dim),
          Vec<T>::Zero(d.head_hidden),
          Mat<T>::Zero(d.embedding_dim, d.head_hidden),
          Vec<T>::Zero(d.embedding_dim),
          Mat<T>::Zero(d.num_classes, d.embedding_dim),
          Vec<T>::Zero(d.num_classes)};
}

template <typename T>
ModelParams<T> ModelParams<T>::glorot(const ModelDims& d, std::uint64_t seed) {
  ModelParams p = zeros(d);
  Rng rng = make_rng(seed, "init");
  glorot_fill<T>(p.att_w1, d.input_dim, d.attention_hidden, rng);
  glorot_fill<T>(p.att_w2, d.attention_hidden, 1, rng);
  glorot_fill<T>(p.head_w1, d.input_dim, d.head_hidden, rng);
  glorot_fill<T>(p.head_w2, d.head_hidden, d.embedding_dim, rng);
  glorot_fill<T>(p.clf_w, d.embedding_dim, d.num_classes, rng);
  return p;
}

template <typename T>
ModelDims ModelParams<T>::dims() const {
  return {static_cast<int>(att_w1.cols()), static_cast<int>(att_w1.rows()),
          static_cast<int>(head_w1.rows()), static_cast<int>(head_w2.rows()),
          static_cast<int>(clf_w.rows())};
}

template <typename T>
void ModelParams<T>::validate() const {
  const ModelDims d = dims();
  require(att_w2.size() == d.attention_hidden, "attention.w2 has " + std::to_string(att_w2.size()));
  require(head_w1.cols() == d.input_dim, "head.w1 is " + shape(head_w1.rows(), head_w1.cols()));
  require(head_b1.size() == d.head_hidden, "head.b1 has " + std::to_string(head_b1.size()));
  require(head_w2.cols() == d.head_hidden, "head.w2 is " + shape(head_w2.rows(), head_w2.cols()));
  require(head_b2.size() == d.embedding_dim, "head.b2 has " + std::to_string(head_b2.size()));
  require(clf_w.cols() == d.embedding_dim, "classifier.w is " + shape(clf_w.rows(), clf_w.cols()));
  require(clf_b.size() == d.num_classes, "classifier.b has " + std::to_string(clf_b.size()));
  d.validate();
  if (!all_finite()) throw DataError("model parameters contain non-finite values");
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const char*, const auto& t) { ok = ok && t.allFinite(); }, *this);
  return ok;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const char*, const auto& t) { n += static_cast<std::size_t>(t.size()); },
                  *this);
  return n;
}

template <typename T>
ModelParams<T>& ModelParams<T>::operator+=(const ModelParams& other) {
  for_each_tensor([](const char*, auto& a, const auto& b) { a += b; }, *this, other);
  return *this;
}

template <typename T>
bool ModelParams<T>::operator==(const ModelParams& other) const {
  bool same = true;
  for_each_tensor(
      [&](const char*, const auto& a, const auto& b) {
        same = same && a.rows() == b.rows() && a.cols() == b.cols() &&
               std::equal(a.data(), a.data() + a.size(), b.data());
      },
      *this, other);
  return same;
}

template <typename T>
Vec<T> attention_scores(const Mat<T>& slices, const ModelParams<T>& params) {
  require(slices.cols() == params.att_w1.cols(),
          "bag d=" + std::to_string(slices.cols()) + ", model d=" +
              std::to_string(params.att_w1.cols()));
  const Mat<T> hidden = (slices * params.att_w1.transpose()).array().tanh().matrix();
  return hidden * params.att_w2;
}

template <typename T>
Vec<T> attention_weights(const Vec<T>& scores) {
  if (scores.size() == 0) throw DataError("attention over an empty bag");
  const T top = scores.maxCoeff();
  Vec<T> w = (scores.array() - top).exp().matrix();
  w /= w.sum();
  return w;
}

template <typename T>
Vec<T> aggregate(const Mat<T>& slices, const Vec<T>& attention) {
  require(attention.size() == slices.rows(),
          std::to_string(attention.size()) + " weights for " + std::to_string(slices.rows()) +
              " slices");
  return slices.transpose() * attention;
}

template <typename T>
ForwardTrace<T> forward(const Mat<T>& slices, const ModelParams<T>& params,
                        const Vec<T>& dropout_mask) {
  require(slices.cols() == params.att_w1.cols(),
          "bag d=" + std::to_string(slices.cols()) + ", model d=" +
              std::to_string(params.att_w1.cols()));
  if (slices.rows() == 0) throw DataError("forward on an empty bag");

  ForwardTrace<T> tr;
  tr.attention_hidden = (slices * params.att_w1.transpose()).array().tanh().matrix();
  tr.scores = tr.attention_hidden * params.att_w2;
  tr.attention = attention_weights<T>(tr.scores);
  tr.aggregate = slices.transpose() * tr.attention;

  tr.head_preact = params.head_w1 * tr.aggregate + params.head_b1;
  tr.head_hidden = tr.head_preact.cwiseMax(T(0));
  if (dropout_mask.size() > 0) {
    require(dropout_mask.size() == tr.head_hidden.size(), "dropout mask length");
    tr.dropout_mask = dropout_mask;
    tr.head_hidden = tr.head_hidden.cwiseProduct(dropout_mask);
  }
  tr.embedding = params.head_w2 * tr.head_hidden + params.head_b2;
  tr.embedding_norm = tr.embedding.norm();
  if (tr.embedding_norm > T(0)) {
    tr.normalized = tr.embedding / tr.embedding_norm;
  } else {
    tr.normalized = Vec<T>::Zero(tr.embedding.size());
    tr.degenerate = true;
  }
  tr.logits = params.clf_w * tr.embedding + params.clf_b;
  return tr;
}

template <typename T>
GradientSet<T> backward(std::span<const ForwardTrace<T>> traces,
                        std::span<const Mat<T>* const> slices, const ModelParams<T>& params,
                        const Mat<T>& logit_grads, const Mat<T>& normalized_grads) {
  const ModelDims d = params.dims();
  const auto batch = static_cast<Eigen::Index>(traces.size());
  require(slices.size() == traces.size(), "traces and bags differ in count");
  require(logit_grads.rows() == batch && logit_grads.cols() == d.num_classes,
          "logit gradient is " + shape(logit_grads.rows(), logit_grads.cols()));
  require(normalized_grads.rows() == batch && normalized_grads.cols() == d.embedding_dim,
          "embedding gradient is " + shape(normalized_grads.rows(), normalized_grads.cols()));

  GradientSet<T> g = ModelParams<T>::zeros(d);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const ForwardTrace<T>& tr = traces[static_cast<std::size_t>(i)];
    const Mat<T>& z = *slices[static_cast<std::size_t>(i)];
    require(tr.logits.size() == d.num_classes && tr.aggregate.size() == d.input_dim &&
                z.rows() == tr.attention.size() && z.cols() == d.input_dim,
            "trace " + std::to_string(i) + " does not match the parameters");

    // classifier
    const Vec<T> g_logits = logit_grads.row(i).transpose();
    g.clf_w.noalias() += g_logits * tr.embedding.transpose();
    g.clf_b += g_logits;
    Vec<T> g_h = params.clf_w.transpose() * g_logits;

    // normalization: d(h/|h|)/dh = (I - h~ h~^T) / |h|
    if (!tr.degenerate) {
      const Vec<T> g_n = normalized_grads.row(i).transpose();
      g_h += (g_n - tr.normalized * tr.normalized.dot(g_n)) / tr.embedding_norm;
    }

    // head
    g.head_w2.noalias() += g_h * tr.head_hidden.transpose();
    g.head_b2 += g_h;
    Vec<T> g_pre = params.head_w2.transpose() * g_h;
    if (tr.dropout_mask.size() > 0) g_pre = g_pre.cwiseProduct(tr.dropout_mask);
    g_pre = (tr.head_preact.array() > T(0)).select(g_pre, T(0));
    g.head_w1.noalias() += g_pre * tr.aggregate.transpose();
    g.head_b1 += g_pre;
    const Vec<T> g_agg = params.head_w1.transpose() * g_pre;

    // pooling: d alpha / d e = diag(alpha) - alpha alpha^T
    const Vec<T> g_alpha = z * g_agg;
    const Vec<T> g_scores =
        tr.attention.cwiseProduct((g_alpha.array() - tr.attention.dot(g_alpha)).matrix());

    // scorer: e_j = w2 . tanh(W1 z_j)
    g.att_w2.noalias() += tr.attention_hidden.transpose() * g_scores;
    const Mat<T> g_hidden_pre =
        ((g_scores * params.att_w2.transpose()).array() *
         (T(1) - tr.attention_hidden.array().square()))
            .matrix();
    g.att_w1.noalias() += g_hidden_pre.transpose() * z;
  }
  return g;
}

template <typename T>
int predict_class(const Vec<T>& logits) {
  int best = 0;
  for (Eigen::Index c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = static_cast<int>(c);
  }
  return best;
}

#define DA3D_INSTANTIATE(T)                                                                  \
  template struct ModelParams<T>;                                                            \
  template Vec<T> attention_scores<T>(const Mat<T>&, const ModelParams<T>&);                 \
  template Vec<T> attention_weights<T>(const Vec<T>&);                                       \
  template Vec<T> aggregate<T>(const Mat<T>&, const Vec<T>&);                                \
  template ForwardTrace<T> forward<T>(const Mat<T>&, const ModelParams<T>&, const Vec<T>&);  \
  template GradientSet<T> backward<T>(std::span<const ForwardTrace<T>>,                      \
                                      std::span<const Mat<T>* const>, const ModelParams<T>&, \
                                      const Mat<T>&, const Mat<T>&);                         \
  template int predict_class<T>(const Vec<T>&);

DA3D_INSTANTIATE(float)
DA3D_INSTANTIATE(double)

#undef DA3D_INSTANTIATE

}  // namespace da3d
