#pragma once

#include <optional>
#include <vector>

#include "stylebridge/tensor.hpp"

namespace stylebridge {

inline constexpr double kProbFloor = 1e-12;

namespace detail_loss {

template <typename T>
void check_prob_rows(const char* op, const Tensor<T>& p, double tol = 1e-5) {
  if (p.rank() != 2) throw std::invalid_argument(std::string(op) + ": expects [B, C]");
  const std::size_t b = p.shape()[0], c = p.shape()[1];
  const auto& d = p.data();
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += static_cast<double>(d[i * c + j]);
    if (std::abs(s - 1.0) > tol)
      throw std::invalid_argument(std::string(op) + ": row " + std::to_string(i) +
                                  " sums to " + std::to_string(s) + ", not 1");
  }
}

}  // namespace detail_loss

/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Tensor<T> pce_loss(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw std::invalid_argument("pce: logits must be [B, C]");
  const std::size_t c = logits.shape()[1];
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= c)
      throw std::out_of_range("pce: label out of range");
  Tensor<T> picked = pick_class(softmax(logits), labels);
  return scale(mean(log_floor(picked, static_cast<T>(kProbFloor)), {0}), T(-1));
}

/// Supervised contrastive loss over one joint batch of unit-norm embeddings.
///
/// For each anchor i with positives P(i) (same label, j != i):
///   -(1/|P(i)|) sum_{p in P(i)} log( exp(s_ip / tau) / sum_{j != i} exp(s_ij / tau) )
/// averaged over anchors that have at least one positive; s is the dot
/// product of rows. Anchors without positives are skipped; if none has a
/// positive the loss is 0 and *no_positives is set.
template <typename T>
Tensor<T> scl_loss(const Tensor<T>& embeddings, const std::vector<int>& labels, T tau,
                   bool* no_positives = nullptr) {
  if (no_positives) *no_positives = false;
  if (embeddings.rank() != 2) throw std::invalid_argument("scl: embeddings must be [B, D]");
  const std::size_t b = embeddings.shape()[0], d = embeddings.shape()[1];
  if (b < 2) throw std::invalid_argument("scl: needs a batch of at least 2");
  if (!(tau > T(0))) throw std::invalid_argument("scl: temperature must be positive");
  if (labels.size() != b) throw std::invalid_argument("scl: label count mismatch");
  const auto& e = embeddings.data();
  for (std::size_t i = 0; i < b; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += static_cast<double>(e[i * d + j]) * e[i * d + j];
    if (std::abs(std::sqrt(ss) - 1.0) > 1e-4)
      throw std::invalid_argument("scl: embedding row " + std::to_string(i) + " is not unit-norm");
  }

  // positive structure and anchor weights
  std::vector<T> pos_weight(b * b, T(0));
  std::vector<T> offdiag(b * b, T(1));
  std::size_t valid_anchors = 0;
  std::vector<std::size_t> pos_count(b, 0);
  for (std::size_t i = 0; i < b; ++i) {
    offdiag[i * b + i] = T(0);
    for (std::size_t j = 0; j < b; ++j)
      if (j != i && labels[j] == labels[i]) ++pos_count[i];
    if (pos_count[i] > 0) ++valid_anchors;
  }
  if (valid_anchors == 0) {
    if (no_positives) *no_positives = true;
    return Tensor<T>::scalar(T(0));
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (pos_count[i] == 0) continue;
    const T w = T(1) / (static_cast<T>(pos_count[i]) * static_cast<T>(valid_anchors));
    for (std::size_t j = 0; j < b; ++j)
      if (j != i && labels[j] == labels[i]) pos_weight[i * b + j] = w;
  }

  Tensor<T> sims = scale(matmul(embeddings, transpose(embeddings)), T(1) / tau);

  // log-sum-exp over j != i with a detached row max for stability
  std::vector<T> row_max(b);
  const auto& sd = sims.data();
  for (std::size_t i = 0; i < b; ++i) {
    T mx = sd[i * b + (i == 0 ? 1 : 0)];
    for (std::size_t j = 0; j < b; ++j)
      if (j != i) mx = std::max(mx, sd[i * b + j]);
    row_max[i] = mx;
  }
  Tensor<T> max_const = Tensor<T>::from_data({b}, row_max);
  Tensor<T> shifted = sub(sims, expand_axis(max_const, 1, b));
  Tensor<T> masked = mul(exp(shifted), Tensor<T>::from_data({b, b}, offdiag));
  Tensor<T> log_denom = add(log(sum(masked, {1})), max_const);  // [b]

  Tensor<T> per_pair = sub(sims, expand_axis(log_denom, 1, b));
  Tensor<T> weighted = mul(per_pair, Tensor<T>::from_data({b, b}, pos_weight));
  return scale(sum(weighted, {0, 1}), T(-1));
}

/// Symmetric cross-entropy between student probs p and teacher probs q:
/// mean over the batch of -sum q log p - sum p log q. q is detached, so
/// gradients flow into p only.
template <typename T>
Tensor<T> symmetric_ce_loss(const Tensor<T>& p, const Tensor<T>& q) {
  detail_loss::check_prob_rows("symmetric_ce", p);
  detail_loss::check_prob_rows("symmetric_ce", q);
  if (p.shape() != q.shape()) throw std::invalid_argument("symmetric_ce: shape mismatch");
  Tensor<T> qd = q.detach();
  Tensor<T> ce_qp = sum(mul(qd, log_floor(p, static_cast<T>(kProbFloor))), {1});
  Tensor<T> ce_pq = sum(mul(p, log_floor(qd, static_cast<T>(kProbFloor))), {1});
  return scale(mean(add(ce_qp, ce_pq), {0}), T(-1));
}

/// Mean Shannon entropy of the prediction rows, in [0, ln C].
template <typename T>
Tensor<T> entropy_loss(const Tensor<T>& p) {
  detail_loss::check_prob_rows("entropy", p);
  Tensor<T> plogp = sum(mul(p, log_floor(p, static_cast<T>(kProbFloor))), {1});
  return scale(mean(plogp, {0}), T(-1));
}

/// Loss term values for one step. total is the plain unweighted sum of the
/// enabled parts.
struct LossBreakdown {
  double pce = 0.0;
  double scl = 0.0;
  double st = 0.0;
  double total = 0.0;
  bool has_pce = false;
  bool has_scl = false;
  bool has_st = false;
};

template <typename T>
struct TotalLoss {
  Tensor<T> value;
  LossBreakdown parts;
};

template <typename T>
TotalLoss<T> total_loss(const std::optional<Tensor<T>>& pce, const std::optional<Tensor<T>>& scl,
                        const std::optional<Tensor<T>>& st) {
  if (!pce && !scl && !st) throw std::invalid_argument("total_loss: no parts enabled");
  TotalLoss<T> out;
  auto fold = [&out](const std::optional<Tensor<T>>& part, double& slot, bool& flag) {
    if (!part) return;
    slot = static_cast<double>(part->item());
    flag = true;
    out.value = out.value.defined() ? add(out.value, *part) : *part;
  };
  fold(pce, out.parts.pce, out.parts.has_pce);
  fold(scl, out.parts.scl, out.parts.has_scl);
  fold(st, out.parts.st, out.parts.has_st);
  out.parts.total = static_cast<double>(out.value.item());
  return out;
}

}  // namespace stylebridge
