#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylebridge/fourier.hpp"
#include "stylebridge/knowledge.hpp"
#include "stylebridge/losses.hpp"
#include "stylebridge/metrics.hpp"
#include "stylebridge/model.hpp"
#include "stylebridge/stream.hpp"

namespace stylebridge {

enum class StVariant { teacher_student, entropy_min };
enum class UpdateScope { all_params, norm_only };
enum class EvalNetwork { auto_pick, teacher, student };

inline const char* st_variant_name(StVariant v) {
  return v == StVariant::teacher_student ? "teacher_student" : "entropy_min";
}
inline const char* update_scope_name(UpdateScope s) {
  return s == UpdateScope::all_params ? "all_params" : "norm_only";
}
inline const char* eval_network_name(EvalNetwork e) {
  switch (e) {
    case EvalNetwork::auto_pick: return "auto";
    case EvalNetwork::teacher: return "teacher";
    case EvalNetwork::student: return "student";
  }
  return "auto";
}

struct AdaptConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_momentum = 0.9;
  std::size_t batch_size = 50;

  bool use_pce = true;
  bool use_input_inject = true;
  bool use_stat_bridge = true;
  bool use_scl = true;
  bool use_st = true;

  StVariant st_variant = StVariant::teacher_student;
  UpdateScope update_scope = UpdateScope::all_params;
  double scl_tau = 1.0;
  double fourier_beta = 1.0;
  double conf_threshold = 0.0;
  EvalNetwork eval_network = EvalNetwork::auto_pick;
  /// Normalization statistics for every forward in the episode: current batch
  /// (the adaptation setting) or the calibrated deployment statistics (the
  /// frozen source baseline).
  bool use_batch_stats = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (lr < 0.0) throw std::invalid_argument("adapt config: lr must be >= 0");
    if (ema_momentum < 0.0 || ema_momentum > 1.0)
      throw std::invalid_argument("adapt config: ema momentum must lie in [0, 1]");
    if (batch_size == 0) throw std::invalid_argument("adapt config: batch size must be >= 1");
    if (!use_pce && !use_scl && !use_st)
      throw std::invalid_argument("adapt config: at least one loss part must be enabled");
    if (!(scl_tau > 0.0)) throw std::invalid_argument("adapt config: scl tau must be positive");
    if (fourier_beta < 0.0 || fourier_beta > 1.0)
      throw std::invalid_argument("adapt config: fourier beta must lie in [0, 1]");
  }

  /// Which network's predictions are recorded online. auto picks the teacher
  /// under teacher_student and the student under entropy_min (which never
  /// touches its teacher).
  bool evaluate_teacher() const {
    if (eval_network == EvalNetwork::teacher) return true;
    if (eval_network == EvalNetwork::student) return false;
    return st_variant == StVariant::teacher_student;
  }
};

/// Raised when a step produces a non-finite loss; carries a state dump so
/// the online run can be diagnosed instead of being silently patched over.
struct EngineAbort : std::runtime_error {
  std::string dump;
  EngineAbort(const std::string& what, std::string dump_text)
      : std::runtime_error(what), dump(std::move(dump_text)) {}
};

template <typename T>
struct AdaptState {
  AdaptConfig cfg;
  ModelParams<T> student;
  ModelParams<T> teacher;
  std::vector<std::vector<T>> moment1;
  std::vector<std::vector<T>> moment2;
  std::size_t step_count = 0;
};

template <typename T>
AdaptState<T> init_adapt(const ModelParams<T>& source, const AdaptConfig& cfg) {
  cfg.validate();
  AdaptState<T> state;
  state.cfg = cfg;
  state.student = source.clone(true);
  state.teacher = source.clone(false);
  auto named = state.student.named_params();
  state.moment1.resize(named.size());
  state.moment2.resize(named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    state.moment1[i].assign(named[i].tensor->size(), T(0));
    state.moment2[i].assign(named[i].tensor->size(), T(0));
  }
  return state;
}

/// Bias-corrected Adam step on one parameter buffer, in place.
template <typename T>
void adam_update(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& m1,
                 std::vector<T>& m2, std::size_t t, double lr, double beta1, double beta2,
                 double eps) {
  if (grad.size() != param.size() || m1.size() != param.size() || m2.size() != param.size())
    throw std::invalid_argument("adam_update: buffer sizes differ");
  if (t < 1) throw std::invalid_argument("adam_update: step index must be >= 1");
  const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
  const T corr1 = T(1) - static_cast<T>(std::pow(beta1, static_cast<double>(t)));
  const T corr2 = T(1) - static_cast<T>(std::pow(beta2, static_cast<double>(t)));
  const T step = static_cast<T>(lr);
  const T e = static_cast<T>(eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    m1[i] = b1 * m1[i] + (T(1) - b1) * grad[i];
    m2[i] = b2 * m2[i] + (T(1) - b2) * grad[i] * grad[i];
    const T mhat = m1[i] / corr1;
    const T vhat = m2[i] / corr2;
    param[i] -= step * mhat / (std::sqrt(vhat) + e);
  }
}

/// Logged intermediates of one step, enough to recompute every loss term
/// independently.
template <typename T>
struct StepTrace {
  std::vector<int> pseudo_labels;
  std::vector<int> knowledge_labels;
  std::vector<Image> knowledge_sampled;
  std::vector<Image> knowledge_styled;
  std::vector<T> knowledge_logits;      // [B, C] row-major
  std::vector<T> student_target_probs;  // [B, C]
  std::vector<T> teacher_probs;         // [B, C], empty under entropy_min
  std::vector<T> joint_embeddings;      // [N, D_proj]
  std::vector<int> joint_labels;
};

struct StepResult {
  std::vector<int> predictions;
  LossBreakdown losses;
};

namespace detail_engine {

template <typename T>
void argmax_rows(const Tensor<T>& probs, std::vector<int>& out, std::vector<double>* conf) {
  const std::size_t rows = probs.shape()[0], cols = probs.shape()[1];
  const auto& d = probs.data();
  out.resize(rows);
  if (conf) conf->resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (d[r * cols + c] > d[r * cols + best]) best = c;
    out[r] = static_cast<int>(best);
    if (conf) (*conf)[r] = static_cast<double>(d[r * cols + best]);
  }
}

template <typename T>
std::string state_dump(const AdaptState<T>& state, const LossBreakdown& losses) {
  std::string out = "{\"step\":" + std::to_string(state.step_count);
  char buf[128];
  std::snprintf(buf, sizeof(buf), ",\"pce\":%g,\"scl\":%g,\"st\":%g,\"total\":%g", losses.pce,
                losses.scl, losses.st, losses.total);
  out += buf;
  out += ",\"params\":{";
  bool first = true;
  for (const auto& np : state.student.named_params()) {
    double l2 = 0.0;
    for (T v : np.tensor->data()) l2 += static_cast<double>(v) * static_cast<double>(v);
    std::snprintf(buf, sizeof(buf), "%s\"%s\":%g", first ? "" : ",", np.name.c_str(),
                  std::sqrt(l2));
    out += buf;
    first = false;
  }
  out += "}}";
  return out;
}

}  // namespace detail_engine

/// One online step: predict the incoming batch with the evaluation network,
/// then adapt the student on the restyled knowledge batch and the target
/// batch, then move the teacher. Predictions are recorded before any update
/// from this batch touches the parameters.
template <typename T>
StepResult adapt_step(AdaptState<T>& state, const std::vector<Image>& targets,
                      const KnowledgeBase& kb, Rng& rng, StepTrace<T>* trace = nullptr) {
  const AdaptConfig& cfg = state.cfg;
  if (targets.empty()) throw std::invalid_argument("adapt_step: empty target batch");
  const std::size_t batch = targets.size();
  const bool with_teacher = cfg.st_variant == StVariant::teacher_student;
  const NormStats stats = cfg.use_batch_stats ? NormStats::batch : NormStats::running;

  // Forwards on the incoming batch, before any parameter update.
  const BridgeStats<T>* no_bridge = nullptr;
  ForwardOut<T> student_t = forward(state.student, targets, no_bridge, stats);
  std::optional<ForwardOut<T>> teacher_t;
  if (with_teacher || cfg.evaluate_teacher())
    teacher_t = forward(state.teacher, targets, no_bridge, stats);

  const Tensor<T>& guide_probs = with_teacher ? teacher_t->probs : student_t.probs;
  std::vector<int> pseudo;
  std::vector<double> confidence;
  detail_engine::argmax_rows(guide_probs, pseudo, &confidence);

  StepResult result;
  const Tensor<T>& eval_probs = cfg.evaluate_teacher() ? teacher_t->probs : student_t.probs;
  detail_engine::argmax_rows(eval_probs, result.predictions, nullptr);

  // Knowledge batch, sized like the target batch, paired in index order.
  auto [kimgs, klabels] = sample_batch(kb, batch, rng);
  std::vector<Image> styled = kimgs;
  if (cfg.use_input_inject)
    for (std::size_t i = 0; i < batch; ++i)
      styled[i] = style_inject(kimgs[i], targets[i], cfg.fourier_beta);

  // Knowledge and target samples go through one joint forward so both groups
  // share normalization statistics; a knowledge-only forward would normalize
  // the exemplars against their own narrow batch.
  const bool need_knowledge = cfg.use_pce || cfg.use_scl;
  std::optional<JointForwardOut<T>> joint;
  if (need_knowledge)
    joint = joint_forward(state.student, styled, targets, cfg.use_stat_bridge, stats);
  const Tensor<T>& st_probs = joint ? joint->target.probs : student_t.probs;

  std::optional<Tensor<T>> pce_part, scl_part, st_part;
  std::vector<int> joint_labels;
  Tensor<T> joint_emb;
  if (cfg.use_pce) pce_part = pce_loss(joint->knowledge.logits, klabels);
  if (cfg.use_scl) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < batch; ++i)
      if (confidence[i] >= cfg.conf_threshold) kept.push_back(i);
    joint_emb = joint->knowledge.h;
    joint_labels = klabels;
    if (!kept.empty()) {
      joint_emb = concat_rows(joint->knowledge.h, gather_rows(joint->target.h, kept));
      for (std::size_t i : kept) joint_labels.push_back(pseudo[i]);
    }
    scl_part = scl_loss(joint_emb, joint_labels, static_cast<T>(cfg.scl_tau));
  }
  if (cfg.use_st) {
    st_part = with_teacher ? symmetric_ce_loss(st_probs, teacher_t->probs)
                           : entropy_loss(st_probs);
  }

  TotalLoss<T> total = total_loss(pce_part, scl_part, st_part);
  result.losses = total.parts;
  if (!std::isfinite(total.parts.total) || !std::isfinite(total.parts.pce) ||
      !std::isfinite(total.parts.scl) || !std::isfinite(total.parts.st))
    throw EngineAbort("non-finite loss at step " + std::to_string(state.step_count),
                      detail_engine::state_dump(state, total.parts));

  auto named = state.student.named_params();
  for (auto& np : named) np.tensor->zero_grad();
  total.value.backward();

  const std::size_t t = state.step_count + 1;
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (!named[i].trainable) continue;
    if (cfg.update_scope == UpdateScope::norm_only && !named[i].norm) continue;
    std::vector<T> updated = named[i].tensor->data();
    adam_update(updated, named[i].tensor->grad(), state.moment1[i], state.moment2[i], t, cfg.lr,
                cfg.beta1, cfg.beta2, cfg.adam_eps);
    *named[i].tensor = Tensor<T>::from_data(named[i].tensor->shape(), std::move(updated), true);
  }

  if (with_teacher)
    state.teacher = ema_update(state.teacher, state.student, cfg.ema_momentum);
  state.step_count = t;

  if (trace) {
    trace->pseudo_labels = pseudo;
    trace->knowledge_labels = klabels;
    trace->knowledge_sampled = kimgs;
    trace->knowledge_styled = styled;
    if (joint) trace->knowledge_logits = joint->knowledge.logits.data();
    trace->student_target_probs = st_probs.data();
    if (teacher_t) trace->teacher_probs = teacher_t->probs.data();
    if (joint_emb.defined()) trace->joint_embeddings = joint_emb.data();
    trace->joint_labels = joint_labels;
  }
  return result;
}

/// Online evaluation over a stream: each batch is predicted at arrival,
/// scored against its hidden labels, and only then used for adaptation.
template <typename T>
MetricsReport run_episode(const ModelParams<T>& source, const AdaptConfig& cfg,
                          const std::vector<Batch>& stream, const KnowledgeBase& kb) {
  if (stream.empty()) throw std::invalid_argument("run_episode: empty stream");
  const auto start = std::chrono::steady_clock::now();

  AdaptState<T> state = init_adapt(source, cfg);
  Rng rng(cfg.seed);

  MetricsReport report;
  report.stream_hash = stream_fingerprint(stream);
  std::map<std::string, std::size_t> domain_index;
  double error_sum = 0.0;

  for (std::size_t bi = 0; bi < stream.size(); ++bi) {
    const Batch& batch = stream[bi];
    StepResult res = adapt_step(state, batch.images(), kb, rng);

    const std::vector<int>& truth = EvalAccess::labels(batch);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (res.predictions[i] != truth[i]) ++wrong;
    const double err = static_cast<double>(wrong) / static_cast<double>(truth.size());
    error_sum += err;

    BatchRecord row;
    row.step = bi;
    row.domain_kind = corruption_name(batch.domain().kind);
    row.severity = batch.domain().severity;
    row.batch_error = err;
    row.cum_error = error_sum / static_cast<double>(bi + 1);
    row.losses = res.losses;
    report.rows.push_back(row);

    const std::string tag = batch.domain().tag();
    auto [it, inserted] = domain_index.try_emplace(tag, report.per_domain.size());
    if (inserted) report.per_domain.push_back({tag, 0.0, 0});
    DomainError& dom = report.per_domain[it->second];
    dom.mean_error += err;
    dom.batches += 1;
  }
  for (DomainError& d : report.per_domain) d.mean_error /= static_cast<double>(d.batches);
  report.overall_error = error_sum / static_cast<double>(stream.size());
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

struct SourceTrainConfig {
  ModelHyper hyper;
  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t samples = 5000;
  std::size_t holdout = 1000;
  std::size_t batch_size = 50;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

template <typename T>
struct SourceTrainResult {
  ModelParams<T> params;
  double holdout_accuracy = 0.0;
  std::vector<double> epoch_losses;
};

/// Supervised pre-training on clean jittered glyphs, cross-entropy only.
/// Deterministic given the seed.
template <typename T>
SourceTrainResult<T> train_source(const SourceTrainConfig& cfg) {
  cfg.hyper.validate();
  Rng rng(cfg.seed);
  // Geometric jitter matches the target stream; ink, background and stroke
  // levels vary as well so the source domain has illumination-style
  // diversity instead of two fixed gray levels.
  auto draw = [&rng](std::size_t count, std::vector<Image>& imgs, std::vector<int>& labels) {
    imgs.reserve(count);
    labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const int cls = static_cast<int>(rng.uniform_index(kGlyphClasses));
      GlyphJitter j;
      j.dx = rng.uniform(-4.0, 4.0);
      j.dy = rng.uniform(-4.0, 4.0);
      j.scale = rng.uniform(0.7, 1.2);
      j.rot_deg = rng.uniform(-20.0, 20.0);
      j.stroke = rng.uniform(0.8, 1.2);
      j.ink = rng.uniform(0.05, 0.35);
      j.bg = rng.uniform(0.7, 0.98);
      imgs.push_back(render_glyph(cls, j));
      labels.push_back(cls);
    }
  };
  std::vector<Image> train_imgs, hold_imgs;
  std::vector<int> train_labels, hold_labels;
  draw(cfg.samples, train_imgs, train_labels);
  draw(cfg.holdout, hold_imgs, hold_labels);

  SourceTrainResult<T> result;
  result.params = ModelParams<T>::random_init(cfg.hyper, rng.next_u64());
  auto named = result.params.named_params();
  std::vector<std::vector<T>> m1(named.size()), m2(named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    m1[i].assign(named[i].tensor->size(), T(0));
    m2[i].assign(named[i].tensor->size(), T(0));
  }

  std::vector<std::size_t> order(train_imgs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const std::size_t end = std::min(pos + cfg.batch_size, order.size());
      std::vector<Image> imgs;
      std::vector<int> labels;
      imgs.reserve(end - pos);
      for (std::size_t k = pos; k < end; ++k) {
        imgs.push_back(train_imgs[order[k]]);
        labels.push_back(train_labels[order[k]]);
      }
      ForwardOut<T> out = forward(result.params, imgs);
      Tensor<T> loss = pce_loss(out.logits, labels);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value))
        throw EngineAbort("source training diverged at step " + std::to_string(t), "{}");
      epoch_loss += value;
      ++batches;

      named = result.params.named_params();
      for (auto& np : named) np.tensor->zero_grad();
      loss.backward();
      ++t;
      for (std::size_t i = 0; i < named.size(); ++i) {
        if (!named[i].trainable) continue;
        std::vector<T> updated = named[i].tensor->data();
        adam_update(updated, named[i].tensor->grad(), m1[i], m2[i], t, cfg.lr, cfg.beta1,
                    cfg.beta2, cfg.adam_eps);
        *named[i].tensor = Tensor<T>::from_data(named[i].tensor->shape(), std::move(updated), true);
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, batches)));
  }

  calibrate_norm_stats(result.params, train_imgs);

  // held-out accuracy in deployment mode, in chunks to bound the graph size
  std::size_t correct = 0;
  constexpr std::size_t kEvalChunk = 100;
  for (std::size_t pos = 0; pos < hold_imgs.size(); pos += kEvalChunk) {
    const std::size_t end = std::min(pos + kEvalChunk, hold_imgs.size());
    std::vector<Image> chunk(hold_imgs.begin() + pos, hold_imgs.begin() + end);
    const BridgeStats<T>* no_bridge = nullptr;
    ForwardOut<T> out = forward(result.params, chunk, no_bridge, NormStats::running);
    std::vector<int> pred;
    detail_engine::argmax_rows(out.probs, pred, nullptr);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == hold_labels[pos + i]) ++correct;
  }
  result.holdout_accuracy =
      hold_imgs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(hold_imgs.size());
  return result;
}

}  // namespace stylebridge
