#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "stylebridge/image.hpp"
#include "stylebridge/rng.hpp"

namespace stylebridge {

/// Compact labeled exemplar set: exactly per_class images for each of
/// class_count classes, entries grouped by class. Immutable once built.
struct KnowledgeBase {
  std::size_t class_count = 0;
  std::size_t per_class = 0;
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

/// Procedurally rendered exemplars: one canonical centered glyph per class,
/// with extra variants differing only in mild stroke/scale variation.
/// Deterministic for a fixed seed.
KnowledgeBase build_procedural(std::size_t class_count, std::size_t per_class, std::uint64_t seed);

/// Loads `<class-id>_<index>.ppm` files. Classes must be 0..C-1 with equal
/// counts and consistent dimensions.
KnowledgeBase load_knowledge(const std::filesystem::path& dir);

/// Writes the `<class-id>_<index>.ppm` layout plus a small manifest.json.
void save_knowledge(const KnowledgeBase& kb, const std::filesystem::path& dir);

/// n entries drawn uniformly with replacement, in draw order.
std::pair<std::vector<Image>, std::vector<int>> sample_batch(const KnowledgeBase& kb,
                                                             std::size_t n, Rng& rng);

}  // namespace stylebridge
