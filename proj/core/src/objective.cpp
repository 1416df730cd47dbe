#include "da3d/objective.hpp"

#include <cmath>
#include <map>

#include "da3d/errors.hpp"

namespace da3d {

namespace {

void check_labels(const std::vector<int>& labels, Eigen::Index rows, int classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw DataError(std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                    " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || (classes > 0 && labels[i] >= classes)) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " out of range");
    }
  }
}

bool usable(const std::vector<bool>& degenerate, Eigen::Index i) {
  return degenerate.empty() || !degenerate[static_cast<std::size_t>(i)];
}

}  // namespace

template <typename T>
LossValue<T> cross_entropy(const Mat<T>& logits, const std::vector<int>& labels) {
  const Eigen::Index batch = logits.rows();
  if (batch == 0) throw DataError("cross-entropy over an empty batch");
  check_labels(labels, batch, static_cast<int>(logits.cols()));
  if (!logits.allFinite()) throw DivergenceError("non-finite logits");

  LossValue<T> out{T(0), Mat<T>::Zero(batch, logits.cols())};
  const T inv_b = T(1) / static_cast<T>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const T top = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - top).exp();
    const T denom = shifted.sum();
    const int y = labels[static_cast<std::size_t>(i)];
    out.value += (top + std::log(denom)) - logits(i, y);
    out.grad.row(i) = (shifted / denom).matrix() * inv_b;
    out.grad(i, y) -= inv_b;
  }
  out.value *= inv_b;
  return out;
}

template <typename T>
LossValue<T> contrastive(const Mat<T>& normalized, const std::vector<int>& labels, double tau,
                         const std::vector<bool>& degenerate) {
  if (!(tau > 0)) throw ConfigError("temperature must be positive");
  const Eigen::Index batch = normalized.rows();
  if (batch == 0) throw DataError("contrastive loss over an empty batch");
  check_labels(labels, batch, 0);
  if (!degenerate.empty() && static_cast<Eigen::Index>(degenerate.size()) != batch) {
    throw DataError("degenerate mask length differs from batch");
  }

  const T inv_tau = T(1) / static_cast<T>(tau);
  const Mat<T> sim = (normalized * normalized.transpose()) * inv_tau;
  LossValue<T> out{T(0), Mat<T>::Zero(batch, normalized.cols())};
  const T scale = inv_tau / static_cast<T>(batch);

  // weight(i, k) = dL/ds_ik; the gradient is then two products with h.
  Mat<T> weight = Mat<T>::Zero(batch, batch);
  std::vector<Eigen::Index> others;
  std::vector<T> coeff;
  for (Eigen::Index i = 0; i < batch; ++i) {
    if (!usable(degenerate, i)) continue;
    others.clear();
    std::size_t positives = 0;
    for (Eigen::Index k = 0; k < batch; ++k) {
      if (k == i || !usable(degenerate, k)) continue;
      others.push_back(k);
      if (labels[static_cast<std::size_t>(k)] == labels[static_cast<std::size_t>(i)]) ++positives;
    }
    if (positives == 0) continue;

    // log sum_{k != i} exp(s_ik) = top + log1p(sum over non-max terms)
    std::size_t arg_top = 0;
    for (std::size_t a = 1; a < others.size(); ++a) {
      if (sim(i, others[a]) > sim(i, others[arg_top])) arg_top = a;
    }
    const T top = sim(i, others[arg_top]);
    coeff.assign(others.size(), T(0));
    T rest = T(0);
    for (std::size_t a = 0; a < others.size(); ++a) {
      coeff[a] = std::exp(sim(i, others[a]) - top);
      if (a != arg_top) rest += coeff[a];
    }
    const T denom = T(1) + rest;

    // mean over positives of (top - s_ij); exact zero when all equal top
    T gap = T(0);
    const T inv_p = T(1) / static_cast<T>(positives);
    for (std::size_t a = 0; a < others.size(); ++a) {
      const bool positive =
          labels[static_cast<std::size_t>(others[a])] == labels[static_cast<std::size_t>(i)];
      if (positive) gap += top - sim(i, others[a]);
      coeff[a] = coeff[a] / denom - (positive ? inv_p : T(0));
    }
    out.value += std::log1p(rest) + gap * inv_p;

    for (std::size_t a = 0; a < others.size(); ++a) weight(i, others[a]) = scale * coeff[a];
  }
  // d s_ik / d h_i = h_k / tau, d s_ik / d h_k = h_i / tau
  out.grad.noalias() = weight * normalized;
  out.grad.noalias() += weight.transpose() * normalized;
  out.value /= static_cast<T>(batch);
  return out;
}

template <typename T>
LossValue<T> variance(const Mat<T>& normalized, const std::vector<int>& labels,
                      const std::vector<bool>& degenerate, int global_classes) {
  const Eigen::Index batch = normalized.rows();
  if (batch == 0) throw DataError("variance loss over an empty batch");
  check_labels(labels, batch, global_classes);
  if (!degenerate.empty() && static_cast<Eigen::Index>(degenerate.size()) != batch) {
    throw DataError("degenerate mask length differs from batch");
  }

  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < batch; ++i) {
    if (usable(degenerate, i)) members[labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  LossValue<T> out{T(0), Mat<T>::Zero(batch, normalized.cols())};
  if (members.empty()) return out;

  const T classes = static_cast<T>(global_classes > 0 ? global_classes
                                                      : static_cast<int>(members.size()));
  for (const auto& [cls, rows] : members) {
    const T count = static_cast<T>(rows.size());
    Eigen::Matrix<T, 1, Eigen::Dynamic> centroid =
        Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(normalized.cols());
    for (auto i : rows) centroid += normalized.row(i);
    centroid /= count;
    T spread = T(0);
    // The centroid's own dependence on h_i cancels because deviations sum to 0.
    for (auto i : rows) {
      const auto dev = normalized.row(i) - centroid;
      spread += dev.squaredNorm();
      out.grad.row(i) = dev * (T(2) / (count * classes));
    }
    out.value += spread / count;
  }
  out.value /= classes;
  return out;
}

template <typename T>
ObjectiveResult<T> total_loss(const BatchViews<T>& views, const ObjectiveConfig& config) {
  if (views.logits.rows() != views.normalized.rows()) {
    throw DataError("logits and embeddings differ in batch size");
  }
  const auto ce = cross_entropy<T>(views.logits, views.labels);
  const auto con = contrastive<T>(views.normalized, views.labels, config.tau, views.degenerate);
  const auto var = variance<T>(views.normalized, views.labels, views.degenerate,
                               config.variance_global_classes ? config.num_classes : 0);

  ObjectiveResult<T> out;
  const T lambda = static_cast<T>(config.lambda);
  out.loss.ce = ce.value;
  out.loss.contra = con.value;
  out.loss.var = var.value;
  out.loss.total = ce.value + con.value + lambda * var.value;
  out.loss.tau = config.tau;
  out.loss.lambda = config.lambda;
  out.logit_grad = ce.grad;
  out.normalized_grad = con.grad + lambda * var.grad;
  return out;
}

#define DA3D_INSTANTIATE(T)                                                                   \
  template LossValue<T> cross_entropy<T>(const Mat<T>&, const std::vector<int>&);             \
  template LossValue<T> contrastive<T>(const Mat<T>&, const std::vector<int>&, double,        \
                                       const std::vector<bool>&);                             \
  template LossValue<T> variance<T>(const Mat<T>&, const std::vector<int>&,                   \
                                    const std::vector<bool>&, int);                           \
  template ObjectiveResult<T> total_loss<T>(const BatchViews<T>&, const ObjectiveConfig&);

DA3D_INSTANTIATE(float)
DA3D_INSTANTIATE(double)

#undef DA3D_INSTANTIATE

}  // namespace da3d
