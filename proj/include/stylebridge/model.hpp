#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stylebridge/image.hpp"
#include "stylebridge/rng.hpp"
#include "stylebridge/tensor.hpp"

namespace stylebridge {

/// Architecture constants. The defaults give a minute-scale CPU model:
/// 32x32x3 input, 4x4 patches (64 tokens), 64-dim embedding, 3 residual
/// blocks, 32-dim projection head, 10 classes.
struct ModelHyper {
  std::size_t image_width = 32;
  std::size_t image_height = 32;
  std::size_t channels = 3;
  std::size_t patch = 4;
  std::size_t embed_dim = 64;
  std::size_t num_blocks = 3;
  std::size_t proj_dim = 32;
  std::size_t num_classes = 10;

  bool operator==(const ModelHyper&) const = default;

  std::size_t tokens() const { return (image_width / patch) * (image_height / patch); }
  std::size_t patch_features() const { return patch * patch * channels; }

  void validate() const {
    if (patch == 0 || image_width % patch != 0 || image_height % patch != 0)
      throw std::invalid_argument("model: image extents must divide by the patch size");
    if (embed_dim == 0 || proj_dim == 0 || num_classes == 0)
      throw std::invalid_argument("model: zero-sized dimension");
    if (channels != 1 && channels != 3)
      throw std::invalid_argument("model: channels must be 1 or 3");
  }
};

inline constexpr double kBridgeEps = 1e-5;
inline constexpr double kNormEps = 0.03;

template <typename T>
struct ModelParams {
  struct Block {
    Tensor<T> lin_w, lin_b, norm_gamma, norm_beta;
    // deployment-time normalization statistics, calibrated after training;
    // adaptation always normalizes with current-batch statistics instead
    Tensor<T> norm_run_mu, norm_run_var;
  };

  ModelHyper hyper;
  Tensor<T> patch_w, patch_b;
  std::vector<Block> blocks;
  Tensor<T> cls_w, cls_b;
  Tensor<T> proj_w, proj_b;

  static ModelParams random_init(const ModelHyper& hyper, std::uint64_t seed) {
    hyper.validate();
    Rng rng(seed);
    auto gauss = [&rng](Shape shape, double sd) {
      std::vector<T> d(shape_numel(shape));
      for (auto& v : d) v = static_cast<T>(rng.normal(0.0, sd));
      return Tensor<T>::from_data(std::move(shape), std::move(d), true);
    };
    const auto F = hyper.patch_features();
    const auto D = hyper.embed_dim;
    ModelParams p;
    p.hyper = hyper;
    p.patch_w = gauss({F, D}, std::sqrt(2.0 / static_cast<double>(F)));
    p.patch_b = Tensor<T>::zeros({D}, true);
    p.blocks.resize(hyper.num_blocks);
    for (auto& blk : p.blocks) {
      blk.lin_w = gauss({D, D}, std::sqrt(2.0 / static_cast<double>(D)));
      blk.lin_b = Tensor<T>::zeros({D}, true);
      blk.norm_gamma = Tensor<T>::ones({D}, true);
      blk.norm_beta = Tensor<T>::zeros({D}, true);
      blk.norm_run_mu = Tensor<T>::zeros({D});
      blk.norm_run_var = Tensor<T>::ones({D});
    }
    p.cls_w = gauss({D, hyper.num_classes}, std::sqrt(1.0 / static_cast<double>(D)));
    p.cls_b = Tensor<T>::zeros({hyper.num_classes}, true);
    p.proj_w = gauss({D, hyper.proj_dim}, std::sqrt(1.0 / static_cast<double>(D)));
    p.proj_b = Tensor<T>::zeros({hyper.proj_dim}, true);
    return p;
  }

  /// Parameters in a fixed order; `norm` marks the normalization scale/shift
  /// pairs targeted by the norm-only update scope, `trainable` is false for
  /// the calibrated statistics buffers.
  struct NamedParam {
    std::string name;
    Tensor<T>* tensor;
    bool norm;
    bool trainable;
  };

  std::vector<NamedParam> named_params() {
    std::vector<NamedParam> out;
    out.push_back({"patch_w", &patch_w, false, true});
    out.push_back({"patch_b", &patch_b, false, true});
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string prefix = "block" + std::to_string(i) + ".";
      out.push_back({prefix + "lin_w", &blocks[i].lin_w, false, true});
      out.push_back({prefix + "lin_b", &blocks[i].lin_b, false, true});
      out.push_back({prefix + "norm_gamma", &blocks[i].norm_gamma, true, true});
      out.push_back({prefix + "norm_beta", &blocks[i].norm_beta, true, true});
      out.push_back({prefix + "norm_run_mu", &blocks[i].norm_run_mu, false, false});
      out.push_back({prefix + "norm_run_var", &blocks[i].norm_run_var, false, false});
    }
    out.push_back({"cls_w", &cls_w, false, true});
    out.push_back({"cls_b", &cls_b, false, true});
    out.push_back({"proj_w", &proj_w, false, true});
    out.push_back({"proj_b", &proj_b, false, true});
    return out;
  }

  std::vector<NamedParam> named_params() const {
    return const_cast<ModelParams*>(this)->named_params();
  }

  ModelParams clone(bool requires_grad) const {
    ModelParams out;
    out.hyper = hyper;
    out.blocks.resize(blocks.size());
    auto src = named_params();
    auto dst = out.named_params();
    for (std::size_t i = 0; i < src.size(); ++i)
      *dst[i].tensor = Tensor<T>::from_data(src[i].tensor->shape(), src[i].tensor->data(),
                                            requires_grad && src[i].trainable);
    return out;
  }
};

/// Which statistics the block normalization uses. Adaptation runs on current
/// batch statistics; the deployed source model is evaluated with the
/// calibrated running statistics.
enum class NormStats { batch, running };

template <typename T>
struct ForwardOut {
  Tensor<T> logits;  // [B, C]
  Tensor<T> z;       // [B, T, D] shallow feature map (post-bridge when bridged)
  Tensor<T> h;       // [B, D_proj], rows L2-normalized
  Tensor<T> probs;   // [B, C]
};

template <typename T>
struct BridgeStats {
  Tensor<T> mu;     // [B, D]
  Tensor<T> sigma;  // [B, D]
};

/// Per-instance, per-channel mean and population std over the token axis.
template <typename T>
BridgeStats<T> extract_stats(const Tensor<T>& z) {
  if (z.rank() != 3) throw std::invalid_argument("extract_stats: expects [B, T, D]");
  if (z.shape()[1] < 1) throw std::invalid_argument("extract_stats: needs at least one token");
  return {mean(z, {1}), sqrt(var(z, {1}))};
}

/// Re-centers and re-scales each instance's channels to the target stats:
/// out = sigma_t * (z - mu_z) / (std_z + eps) + mu_t. Differentiable in all
/// tensor inputs.
template <typename T>
Tensor<T> statistic_bridge(const Tensor<T>& z, const Tensor<T>& mu_t, const Tensor<T>& sigma_t,
                           T eps) {
  if (z.rank() != 3) throw std::invalid_argument("statistic_bridge: z must be [B, T, D]");
  if (!(eps > T(0))) throw std::invalid_argument("statistic_bridge: eps must be positive");
  const std::size_t batch = z.shape()[0], tokens = z.shape()[1], dim = z.shape()[2];
  const Shape want{batch, dim};
  if (mu_t.shape() != want || sigma_t.shape() != want)
    throw std::invalid_argument("statistic_bridge: stats must be [B, D] matching z");
  for (T s : sigma_t.data())
    if (s < T(0)) throw std::invalid_argument("statistic_bridge: negative target std");

  BridgeStats<T> own = extract_stats(z);
  Tensor<T> centered = sub(z, expand_axis(own.mu, 1, tokens));
  Tensor<T> denom = expand_axis(add_scalar(own.sigma, eps), 1, tokens);
  Tensor<T> normalized = div(centered, denom);
  return add(mul(expand_axis(sigma_t, 1, tokens), normalized), expand_axis(mu_t, 1, tokens));
}

namespace detail_model {

/// Fixed input conditioning ahead of patch extraction: a 3x3 median pass
/// (kills impulse-style outliers, keeps edges), a 3x3 mean pass, then
/// per-image standardization. The standardization is needed because raw
/// [0, 1] pixels leave uniform patches of different intensity embedding into
/// parallel vectors, which the scale-invariant block normalization cannot
/// tell apart.
inline std::vector<double> condition_pixels(const Image& img) {
  const std::size_t w = img.width, h = img.height;
  std::vector<double> smooth(img.pix.size());
  std::vector<double> next(img.pix.size());

  for (std::size_t c = 0; c < img.channels; ++c) {
    const double* src = img.pix.data() + c * h * w;
    double* dst = smooth.data() + c * h * w;
    double window[9];
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t y0 = y > 0 ? y - 1 : 0;
      const std::size_t y1 = y + 1 < h ? y + 1 : h - 1;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t x0 = x > 0 ? x - 1 : 0;
        const std::size_t x1 = x + 1 < w ? x + 1 : w - 1;
        window[0] = src[y0 * w + x0];
        window[1] = src[y0 * w + x];
        window[2] = src[y0 * w + x1];
        window[3] = src[y * w + x0];
        window[4] = src[y * w + x];
        window[5] = src[y * w + x1];
        window[6] = src[y1 * w + x0];
        window[7] = src[y1 * w + x];
        window[8] = src[y1 * w + x1];
        std::nth_element(window, window + 4, window + 9);
        dst[y * w + x] = window[4];
      }
    }
  }

  for (std::size_t c = 0; c < img.channels; ++c) {
    const double* src = smooth.data() + c * h * w;
    double* dst = next.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t y0 = y > 0 ? y - 1 : 0;
      const std::size_t y1 = y + 1 < h ? y + 1 : h - 1;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t x0 = x > 0 ? x - 1 : 0;
        const std::size_t x1 = x + 1 < w ? x + 1 : w - 1;
        const double acc = src[y0 * w + x0] + src[y0 * w + x] + src[y0 * w + x1] +
                           src[y * w + x0] + src[y * w + x] + src[y * w + x1] +
                           src[y1 * w + x0] + src[y1 * w + x] + src[y1 * w + x1];
        dst[y * w + x] = acc / 9.0;
      }
    }
  }
  std::swap(smooth, next);

  double mu = 0.0;
  for (double v : smooth) mu += v;
  mu /= static_cast<double>(smooth.size());
  double var = 0.0;
  for (double v : smooth) var += (v - mu) * (v - mu);
  var /= static_cast<double>(smooth.size());
  const double inv_sd = 1.0 / (std::sqrt(var) + 1e-3);
  for (double& v : smooth) v = (v - mu) * inv_sd;
  return smooth;
}

}  // namespace detail_model

/// Images -> flat patch features [B*T, P*P*ch], feature order (c, py, px)
/// inside each patch, tokens row-major over the patch grid. Pixels pass
/// through condition_pixels first.
template <typename T>
Tensor<T> patchify(const std::vector<Image>& images, const ModelHyper& hyper) {
  const std::size_t batch = images.size();
  const std::size_t grid_w = hyper.image_width / hyper.patch;
  const std::size_t grid_h = hyper.image_height / hyper.patch;
  const std::size_t feat = hyper.patch_features();
  std::vector<T> out(batch * hyper.tokens() * feat);
  std::size_t row = 0;
  for (const Image& img : images) {
    if (img.width != hyper.image_width || img.height != hyper.image_height ||
        img.channels != hyper.channels)
      throw std::invalid_argument("patchify: image does not match model input shape");
    const std::vector<double> px_in = detail_model::condition_pixels(img);
    const std::size_t plane = img.width * img.height;
    for (std::size_t py = 0; py < grid_h; ++py) {
      for (std::size_t px = 0; px < grid_w; ++px) {
        T* dst = out.data() + row * feat;
        std::size_t k = 0;
        for (std::size_t c = 0; c < hyper.channels; ++c)
          for (std::size_t sy = 0; sy < hyper.patch; ++sy)
            for (std::size_t sx = 0; sx < hyper.patch; ++sx)
              dst[k++] = static_cast<T>(
                  px_in[c * plane + (py * hyper.patch + sy) * img.width + px * hyper.patch + sx]);
        ++row;
      }
    }
  }
  return Tensor<T>::from_data({batch * hyper.tokens(), feat}, std::move(out));
}

namespace detail_model {

// bias [D] added to every row of x [N, D]
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  return add(x, expand_axis(bias, 0, x.shape()[0]));
}

// per-feature normalization over the batch-token axis with learnable
// scale/shift; with NormStats::batch the statistics come from the current
// rows, so features re-center under distribution shift at test time
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const typename ModelParams<T>::Block& blk,
                     NormStats stats) {
  const std::size_t rows = x.shape()[0];
  Tensor<T> mu = stats == NormStats::batch ? mean(x, {0}) : blk.norm_run_mu;
  Tensor<T> v = stats == NormStats::batch ? var(x, {0}) : blk.norm_run_var;
  Tensor<T> centered = sub(x, expand_axis(mu, 0, rows));
  Tensor<T> denom = expand_axis(sqrt(add_scalar(v, static_cast<T>(kNormEps))), 0, rows);
  Tensor<T> normed = div(centered, denom);
  return add(mul(normed, expand_axis(blk.norm_gamma, 0, rows)),
             expand_axis(blk.norm_beta, 0, rows));
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
  const std::size_t dim = x.shape()[1];
  Tensor<T> ss = sum(mul(x, x), {1});
  Tensor<T> norm = sqrt(add_scalar(ss, static_cast<T>(1e-12)));
  return div(x, expand_axis(norm, 1, dim));
}

}  // namespace detail_model

/// Full forward pass. When bridge stats are given they are applied to the
/// patch-embedding output z before the residual blocks, and gradients flow
/// through the bridging transform.
template <typename T>
ForwardOut<T> forward(const ModelParams<T>& params, const std::vector<Image>& images,
                      const BridgeStats<T>* bridge = nullptr,
                      NormStats stats = NormStats::batch) {
  const ModelHyper& hy = params.hyper;
  hy.validate();
  if (images.empty()) throw std::invalid_argument("forward: empty image batch");
  const std::size_t batch = images.size();
  const std::size_t tokens = hy.tokens();
  const std::size_t dim = hy.embed_dim;
  if (bridge && (bridge->mu.shape() != Shape{batch, dim}))
    throw std::invalid_argument("forward: bridge stats batch size mismatch");

  Tensor<T> patches = patchify<T>(images, hy);
  Tensor<T> embedded = detail_model::add_bias(matmul(patches, params.patch_w), params.patch_b);
  Tensor<T> z = reshape(embedded, {batch, tokens, dim});
  if (bridge) z = statistic_bridge(z, bridge->mu, bridge->sigma, static_cast<T>(kBridgeEps));

  Tensor<T> x = reshape(z, {batch * tokens, dim});
  for (const auto& blk : params.blocks) {
    Tensor<T> u = detail_model::add_bias(matmul(x, blk.lin_w), blk.lin_b);
    Tensor<T> n = detail_model::batch_norm(u, blk, stats);
    x = add(x, relu(n));
  }

  Tensor<T> pooled = mean(reshape(x, {batch, tokens, dim}), {1});
  Tensor<T> logits = detail_model::add_bias(matmul(pooled, params.cls_w), params.cls_b);
  Tensor<T> proj = detail_model::add_bias(matmul(pooled, params.proj_w), params.proj_b);

  ForwardOut<T> out;
  out.logits = logits;
  out.z = z;
  out.h = detail_model::l2_normalize_rows(proj);
  out.probs = softmax(logits);
  return out;
}

template <typename T>
struct JointForwardOut {
  ForwardOut<T> knowledge;
  ForwardOut<T> target;
};

/// One forward over the knowledge batch and the target batch together, so
/// both groups share normalization statistics. The statistic bridge, when
/// enabled, restyles the knowledge z with the target batch's own (detached)
/// instance statistics, paired in index order.
template <typename T>
JointForwardOut<T> joint_forward(const ModelParams<T>& params,
                                 const std::vector<Image>& knowledge_images,
                                 const std::vector<Image>& target_images, bool bridge_knowledge,
                                 NormStats stats = NormStats::batch) {
  const ModelHyper& hy = params.hyper;
  hy.validate();
  if (knowledge_images.empty() || target_images.empty())
    throw std::invalid_argument("joint_forward: empty batch");
  if (bridge_knowledge && knowledge_images.size() != target_images.size())
    throw std::invalid_argument("joint_forward: bridging needs index-paired batches");
  const std::size_t bk = knowledge_images.size();
  const std::size_t bt = target_images.size();
  const std::size_t tokens = hy.tokens();
  const std::size_t dim = hy.embed_dim;

  auto embed = [&](const std::vector<Image>& imgs) {
    Tensor<T> patches = patchify<T>(imgs, hy);
    return reshape(detail_model::add_bias(matmul(patches, params.patch_w), params.patch_b),
                   {imgs.size(), tokens, dim});
  };
  Tensor<T> zt = embed(target_images);
  Tensor<T> zk = embed(knowledge_images);
  if (bridge_knowledge) {
    BridgeStats<T> own = extract_stats(zt);
    zk = statistic_bridge(zk, own.mu.detach(), own.sigma.detach(), static_cast<T>(kBridgeEps));
  }

  Tensor<T> x = concat_rows(reshape(zk, {bk * tokens, dim}), reshape(zt, {bt * tokens, dim}));
  for (const auto& blk : params.blocks) {
    Tensor<T> u = detail_model::add_bias(matmul(x, blk.lin_w), blk.lin_b);
    Tensor<T> n = detail_model::batch_norm(u, blk, stats);
    x = add(x, relu(n));
  }
  Tensor<T> pooled = mean(reshape(x, {bk + bt, tokens, dim}), {1});
  Tensor<T> logits = detail_model::add_bias(matmul(pooled, params.cls_w), params.cls_b);
  Tensor<T> h = detail_model::l2_normalize_rows(
      detail_model::add_bias(matmul(pooled, params.proj_w), params.proj_b));
  Tensor<T> probs = softmax(logits);

  std::vector<std::size_t> k_rows(bk), t_rows(bt);
  for (std::size_t i = 0; i < bk; ++i) k_rows[i] = i;
  for (std::size_t i = 0; i < bt; ++i) t_rows[i] = bk + i;

  JointForwardOut<T> out;
  out.knowledge.logits = gather_rows(logits, k_rows);
  out.knowledge.h = gather_rows(h, k_rows);
  out.knowledge.probs = gather_rows(probs, k_rows);
  out.knowledge.z = zk;
  out.target.logits = gather_rows(logits, t_rows);
  out.target.h = gather_rows(h, t_rows);
  out.target.probs = gather_rows(probs, t_rows);
  out.target.z = zt;
  return out;
}

/// Calibrates the running normalization statistics from a sample of the
/// training distribution: one pass per block, aggregating the pre-norm
/// activation moments feature-wise over all tokens of all images.
template <typename T>
void calibrate_norm_stats(ModelParams<T>& params, const std::vector<Image>& images,
                          std::size_t chunk = 250) {
  const ModelHyper& hy = params.hyper;
  const std::size_t dim = hy.embed_dim;
  for (std::size_t bi = 0; bi < params.blocks.size(); ++bi) {
    std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < images.size(); pos += chunk) {
      const std::size_t end = std::min(pos + chunk, images.size());
      const std::vector<Image> part(images.begin() + pos, images.begin() + end);

      // run the already-calibrated prefix with running stats, then collect
      // this block's pre-norm activations
      Tensor<T> patches = patchify<T>(part, hy);
      Tensor<T> x = detail_model::add_bias(matmul(patches, params.patch_w), params.patch_b);
      for (std::size_t k = 0; k < bi; ++k) {
        const auto& blk = params.blocks[k];
        Tensor<T> u = detail_model::add_bias(matmul(x, blk.lin_w), blk.lin_b);
        x = add(x, relu(detail_model::batch_norm(u, blk, NormStats::running)));
      }
      const auto& blk = params.blocks[bi];
      Tensor<T> u = detail_model::add_bias(matmul(x, blk.lin_w), blk.lin_b);
      const auto& d = u.data();
      const std::size_t rows = u.shape()[0];
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < dim; ++j) {
          sum[j] += static_cast<double>(d[r * dim + j]);
          sum_sq[j] += static_cast<double>(d[r * dim + j]) * d[r * dim + j];
        }
      count += rows;
    }
    std::vector<T> mu(dim), v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const double m = sum[j] / static_cast<double>(count);
      mu[j] = static_cast<T>(m);
      v[j] = static_cast<T>(std::max(0.0, sum_sq[j] / static_cast<double>(count) - m * m));
    }
    params.blocks[bi].norm_run_mu = Tensor<T>::from_data({dim}, std::move(mu));
    params.blocks[bi].norm_run_var = Tensor<T>::from_data({dim}, std::move(v));
  }
}

/// theta_teacher' = m * theta_teacher + (1 - m) * theta_student, per scalar.
/// Returns detached parameters (the teacher is never backpropagated into).
template <typename T>
ModelParams<T> ema_update(const ModelParams<T>& teacher, const ModelParams<T>& student,
                          double momentum) {
  if (!(teacher.hyper == student.hyper))
    throw std::invalid_argument("ema_update: teacher/student hyperparameters differ");
  if (momentum < 0.0 || momentum > 1.0)
    throw std::invalid_argument("ema_update: momentum must lie in [0, 1]");
  ModelParams<T> out;
  out.hyper = teacher.hyper;
  out.blocks.resize(teacher.blocks.size());
  auto t = teacher.named_params();
  auto s = student.named_params();
  auto dst = out.named_params();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& td = t[i].tensor->data();
    const auto& sd = s[i].tensor->data();
    if (t[i].tensor->shape() != s[i].tensor->shape())
      throw std::invalid_argument("ema_update: parameter shape mismatch at " + t[i].name);
    std::vector<T> nd(td.size());
    const T m = static_cast<T>(momentum);
    for (std::size_t k = 0; k < nd.size(); ++k) nd[k] = m * td[k] + (T(1) - m) * sd[k];
    *dst[i].tensor = Tensor<T>::from_data(t[i].tensor->shape(), std::move(nd), false);
  }
  return out;
}

}  // namespace stylebridge
