#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stylebridge/glyphs.hpp"
#include "stylebridge/image.hpp"
#include "stylebridge/rng.hpp"

namespace stylebridge {

enum class Corruption {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  defocus_blur,
  contrast,
  brightness,
  fog,
  pixelate,
};

inline constexpr std::size_t kCorruptionKinds = 8;

const char* corruption_name(Corruption kind);
std::optional<Corruption> corruption_from_name(const std::string& name);

/// Corruption kind plus severity 0..5; severity 0 is the identity.
struct DomainSpec {
  Corruption kind = Corruption::gaussian_noise;
  int severity = 5;

  bool operator==(const DomainSpec&) const = default;
  std::string tag() const { return std::string(corruption_name(kind)) + ":" + std::to_string(severity); }
};

/// Per-severity parameter tables (index severity - 1). Strength is monotone
/// in severity for every kind; for shot noise lower photon count is stronger.
namespace severity_tables {
inline constexpr double gaussian_sigma[5] = {0.04, 0.08, 0.12, 0.18, 0.26};
inline constexpr double shot_photons[5] = {60.0, 25.0, 12.0, 5.0, 3.0};
inline constexpr double impulse_fraction[5] = {0.01, 0.03, 0.06, 0.10, 0.17};
inline constexpr int defocus_radius[5] = {1, 1, 2, 2, 3};
inline constexpr int defocus_passes[5] = {1, 2, 2, 3, 3};
inline constexpr double contrast_factor[5] = {0.75, 0.6, 0.45, 0.3, 0.2};
inline constexpr double brightness_shift[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr double fog_alpha[5] = {0.15, 0.25, 0.35, 0.45, 0.55};
inline constexpr int pixelate_block[5] = {2, 2, 4, 4, 8};
}  // namespace severity_tables

/// One timestep of the target stream. The adaptation loop only ever sees
/// images(); ground truth stays behind EvalAccess for the evaluator.
class Batch {
public:
  Batch(std::vector<Image> images, std::vector<int> labels, DomainSpec domain)
      : images_(std::move(images)), labels_(std::move(labels)), domain_(domain) {
    if (images_.size() != labels_.size())
      throw std::invalid_argument("batch: image/label count mismatch");
  }

  const std::vector<Image>& images() const { return images_; }
  const DomainSpec& domain() const { return domain_; }
  std::size_t size() const { return images_.size(); }

private:
  friend struct EvalAccess;
  std::vector<Image> images_;
  std::vector<int> labels_;
  DomainSpec domain_;
};

/// Evaluator-side join of predictions to hidden labels. Adaptation code has
/// no business calling this.
struct EvalAccess {
  static const std::vector<int>& labels(const Batch& b) { return b.labels_; }
};

/// Applies one corruption at the given severity. Severity 0 returns the
/// input bit-exactly; output always stays in [0, 1].
Image corrupt(const Image& img, const DomainSpec& spec, Rng& rng);

struct StreamConfig {
  std::vector<DomainSpec> domains;
  std::size_t batches_per_domain = 20;
  std::size_t batch_size = 50;
  std::uint64_t seed = 7;
};

/// All 8 corruption kinds, in enum order, at the given severity.
std::vector<DomainSpec> default_domains(int severity = 5);

/// Ordered stream of corrupted glyph batches; classes drawn uniformly,
/// jitter within the documented ranges, fully deterministic given the seed.
std::vector<Batch> make_stream(const StreamConfig& cfg);

/// Batch-level permutation; each batch keeps its contents and domain tag.
std::vector<Batch> shuffle_mixed(std::vector<Batch> stream, std::uint64_t seed);

/// FNV-1a fingerprint over images, labels, and domain tags. Used to assert
/// that controlled comparisons really share one stream.
std::string stream_fingerprint(const std::vector<Batch>& stream);

}  // namespace stylebridge
