#include "stylebridge/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "stylebridge/glyphs.hpp"

namespace stylebridge {

KnowledgeBase build_procedural(std::size_t class_count, std::size_t per_class, std::uint64_t seed) {
  if (class_count == 0 || class_count > kGlyphClasses)
    throw std::invalid_argument("build_procedural: class count must be in [1, " +
                                std::to_string(kGlyphClasses) + "]");
  if (per_class == 0) throw std::invalid_argument("build_procedural: per_class must be >= 1");

  Rng rng(seed);
  KnowledgeBase kb;
  kb.class_count = class_count;
  kb.per_class = per_class;
  kb.images.reserve(class_count * per_class);
  kb.labels.reserve(class_count * per_class);
  for (std::size_t c = 0; c < class_count; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      GlyphJitter j;  // variant 0 is the canonical rendering
      if (k > 0) {
        j.scale = rng.uniform(0.9, 1.1);
        j.stroke = rng.uniform(0.85, 1.15);
      }
      kb.images.push_back(render_glyph(static_cast<int>(c), j));
      kb.labels.push_back(static_cast<int>(c));
    }
  }
  return kb;
}

KnowledgeBase load_knowledge(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw std::runtime_error("knowledge load: " + dir.string() + " is not a directory");

  // class id -> (index, path), sorted for a stable entry order
  std::map<int, std::map<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    const auto sep = stem.find('_');
    if (sep == std::string::npos) continue;
    int cls = -1, idx = -1;
    try {
      cls = std::stoi(stem.substr(0, sep));
      idx = std::stoi(stem.substr(sep + 1));
    } catch (const std::exception&) {
      continue;
    }
    if (cls < 0 || idx < 0) continue;
    files[cls][idx] = entry.path();
  }
  if (files.empty()) throw std::runtime_error("knowledge load: no exemplars found in " + dir.string());

  const std::size_t class_count = files.size();
  for (std::size_t c = 0; c < class_count; ++c)
    if (!files.count(static_cast<int>(c)))
      throw std::runtime_error("knowledge load: class ids must be contiguous from 0; missing " +
                               std::to_string(c));

  const std::size_t per_class = files.begin()->second.size();
  for (const auto& [cls, m] : files)
    if (m.size() != per_class)
      throw std::runtime_error("knowledge load: ragged class counts (class " +
                               std::to_string(cls) + " has " + std::to_string(m.size()) +
                               ", expected " + std::to_string(per_class) + ")");

  KnowledgeBase kb;
  kb.class_count = class_count;
  kb.per_class = per_class;
  std::size_t w = 0, h = 0;
  for (const auto& [cls, m] : files) {
    for (const auto& [idx, path] : m) {
      Image img = read_ppm(path);
      if (w == 0) {
        w = img.width;
        h = img.height;
      } else if (img.width != w || img.height != h) {
        throw std::runtime_error("knowledge load: inconsistent dimensions at " + path.string());
      }
      kb.images.push_back(std::move(img));
      kb.labels.push_back(cls);
    }
  }
  return kb;
}

void save_knowledge(const KnowledgeBase& kb, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::size_t> next_index(kb.class_count, 0);
  for (std::size_t i = 0; i < kb.images.size(); ++i) {
    const int cls = kb.labels[i];
    const std::size_t idx = next_index[static_cast<std::size_t>(cls)]++;
    write_ppm(dir / (std::to_string(cls) + "_" + std::to_string(idx) + ".ppm"), kb.images[i]);
  }
  nlohmann::json manifest;
  manifest["classes"] = kb.class_count;
  manifest["per_class"] = kb.per_class;
  manifest["width"] = kb.images.empty() ? 0 : kb.images.front().width;
  manifest["height"] = kb.images.empty() ? 0 : kb.images.front().height;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

std::pair<std::vector<Image>, std::vector<int>> sample_batch(const KnowledgeBase& kb,
                                                             std::size_t n, Rng& rng) {
  if (n > 0 && kb.size() == 0)
    throw std::runtime_error("sample_batch: knowledge base is empty");
  std::vector<Image> images;
  std::vector<int> labels;
  images.reserve(n);
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pick = rng.uniform_index(kb.size());
    images.push_back(kb.images[pick]);
    labels.push_back(kb.labels[pick]);
  }
  return {std::move(images), std::move(labels)};
}

}  // namespace stylebridge
