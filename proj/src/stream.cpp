#include "stylebridge/stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace stylebridge {

const char* corruption_name(Corruption kind) {
  switch (kind) {
    case Corruption::gaussian_noise: return "gaussian_noise";
    case Corruption::shot_noise: return "shot_noise";
    case Corruption::impulse_noise: return "impulse_noise";
    case Corruption::defocus_blur: return "defocus_blur";
    case Corruption::contrast: return "contrast";
    case Corruption::brightness: return "brightness";
    case Corruption::fog: return "fog";
    case Corruption::pixelate: return "pixelate";
  }
  throw std::invalid_argument("unknown corruption kind");
}

std::optional<Corruption> corruption_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kCorruptionKinds; ++i) {
    const auto kind = static_cast<Corruption>(i);
    if (name == corruption_name(kind)) return kind;
  }
  return std::nullopt;
}

namespace {

Image box_blur(const Image& img, int radius, int passes) {
  Image cur = img;
  const auto w = static_cast<long>(img.width);
  const auto h = static_cast<long>(img.height);
  const double norm = 1.0 / ((2.0 * radius + 1.0) * (2.0 * radius + 1.0));
  for (int p = 0; p < passes; ++p) {
    Image next = cur;
    for (std::size_t c = 0; c < img.channels; ++c) {
      for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
          double acc = 0.0;
          for (long dy = -radius; dy <= radius; ++dy) {
            const long sy = std::clamp(y + dy, 0L, h - 1);
            for (long dx = -radius; dx <= radius; ++dx) {
              const long sx = std::clamp(x + dx, 0L, w - 1);
              acc += cur.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
          next.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc * norm;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// Smooth haze field: a coarse random grid upsampled bilinearly, shared
// across channels.
std::vector<double> haze_field(std::size_t width, std::size_t height, Rng& rng) {
  constexpr std::size_t kGrid = 4;
  double grid[kGrid][kGrid];
  for (std::size_t gy = 0; gy < kGrid; ++gy)
    for (std::size_t gx = 0; gx < kGrid; ++gx) grid[gy][gx] = rng.uniform(0.6, 1.0);
  std::vector<double> field(width * height);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(height) * (kGrid - 1);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, kGrid - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(width) * (kGrid - 1);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, kGrid - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = grid[y0][x0] * (1 - tx) + grid[y0][x1] * tx;
      const double bot = grid[y1][x0] * (1 - tx) + grid[y1][x1] * tx;
      field[y * width + x] = top * (1 - ty) + bot * ty;
    }
  }
  return field;
}

}  // namespace

Image corrupt(const Image& img, const DomainSpec& spec, Rng& rng) {
  if (spec.severity < 0 || spec.severity > 5)
    throw std::invalid_argument("corrupt: severity must be in [0, 5]");
  if (spec.severity == 0) return img;
  const int s = spec.severity - 1;
  namespace tab = severity_tables;

  Image out = img;
  switch (spec.kind) {
    case Corruption::gaussian_noise: {
      const double sigma = tab::gaussian_sigma[s];
      for (auto& v : out.pix) v += rng.normal(0.0, sigma);
      break;
    }
    case Corruption::shot_noise: {
      const double lambda = tab::shot_photons[s];
      for (auto& v : out.pix) v = static_cast<double>(rng.poisson(v * lambda)) / lambda;
      break;
    }
    case Corruption::impulse_noise: {
      const double frac = tab::impulse_fraction[s];
      for (auto& v : out.pix)
        if (rng.uniform01() < frac) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
      break;
    }
    case Corruption::defocus_blur:
      out = box_blur(out, tab::defocus_radius[s], tab::defocus_passes[s]);
      break;
    case Corruption::contrast: {
      double mu = 0.0;
      for (double v : out.pix) mu += v;
      mu /= static_cast<double>(out.pix.size());
      const double f = tab::contrast_factor[s];
      for (auto& v : out.pix) v = mu + f * (v - mu);
      break;
    }
    case Corruption::brightness: {
      const double shift = tab::brightness_shift[s];
      for (auto& v : out.pix) v += shift;
      break;
    }
    case Corruption::fog: {
      const double alpha = tab::fog_alpha[s];
      const std::vector<double> haze = haze_field(out.width, out.height, rng);
      for (std::size_t c = 0; c < out.channels; ++c) {
        double* plane = out.plane(c);
        for (std::size_t i = 0; i < haze.size(); ++i)
          plane[i] = (1.0 - alpha) * plane[i] + alpha * haze[i];
      }
      break;
    }
    case Corruption::pixelate: {
      const int block = tab::pixelate_block[s];
      for (std::size_t c = 0; c < out.channels; ++c) {
        for (std::size_t y0 = 0; y0 < out.height; y0 += block) {
          for (std::size_t x0 = 0; x0 < out.width; x0 += block) {
            const std::size_t y1 = std::min(y0 + block, out.height);
            const std::size_t x1 = std::min(x0 + block, out.width);
            double acc = 0.0;
            for (std::size_t y = y0; y < y1; ++y)
              for (std::size_t x = x0; x < x1; ++x) acc += out.at(c, y, x);
            acc /= static_cast<double>((y1 - y0) * (x1 - x0));
            for (std::size_t y = y0; y < y1; ++y)
              for (std::size_t x = x0; x < x1; ++x) out.at(c, y, x) = acc;
          }
        }
      }
      break;
    }
  }
  out.clamp01();
  return out;
}

std::vector<DomainSpec> default_domains(int severity) {
  std::vector<DomainSpec> out;
  out.reserve(kCorruptionKinds);
  for (std::size_t i = 0; i < kCorruptionKinds; ++i)
    out.push_back({static_cast<Corruption>(i), severity});
  return out;
}

std::vector<Batch> make_stream(const StreamConfig& cfg) {
  if (cfg.domains.empty()) throw std::invalid_argument("make_stream: empty domain list");
  if (cfg.batch_size == 0) throw std::invalid_argument("make_stream: batch size must be >= 1");
  Rng rng(cfg.seed);
  std::vector<Batch> stream;
  stream.reserve(cfg.domains.size() * cfg.batches_per_domain);
  for (const DomainSpec& domain : cfg.domains) {
    for (std::size_t b = 0; b < cfg.batches_per_domain; ++b) {
      std::vector<Image> images;
      std::vector<int> labels;
      images.reserve(cfg.batch_size);
      labels.reserve(cfg.batch_size);
      for (std::size_t i = 0; i < cfg.batch_size; ++i) {
        const int cls = static_cast<int>(rng.uniform_index(kGlyphClasses));
        GlyphJitter j;
        j.dx = rng.uniform(-4.0, 4.0);
        j.dy = rng.uniform(-4.0, 4.0);
        j.scale = rng.uniform(0.7, 1.2);
        j.rot_deg = rng.uniform(-20.0, 20.0);
        images.push_back(corrupt(render_glyph(cls, j), domain, rng));
        labels.push_back(cls);
      }
      stream.emplace_back(std::move(images), std::move(labels), domain);
    }
  }
  return stream;
}

std::vector<Batch> shuffle_mixed(std::vector<Batch> stream, std::uint64_t seed) {
  if (stream.empty()) throw std::invalid_argument("shuffle_mixed: empty stream");
  Rng rng(seed);
  rng.shuffle(stream.begin(), stream.end());
  return stream;
}

std::string stream_fingerprint(const std::vector<Batch>& stream) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Batch& b : stream) {
    const std::string tag = b.domain().tag();
    mix(tag.data(), tag.size());
    for (const Image& img : b.images()) mix(img.pix.data(), img.pix.size() * sizeof(double));
    const auto& labels = EvalAccess::labels(b);
    mix(labels.data(), labels.size() * sizeof(int));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace stylebridge
