#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylebridge {

/// Planar (channel-major) raster with values in [0, 1]. Channels is 1 or 3.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> pix;  // pix[(c * height + y) * width + x]

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t ch, double fill = 0.0)
      : width(w), height(h), channels(ch), pix(w * h * ch, fill) {
    if (w == 0 || h == 0) throw std::invalid_argument("image: dimensions must be positive");
    if (ch != 1 && ch != 3) throw std::invalid_argument("image: channels must be 1 or 3");
  }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pix[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pix[(c * height + y) * width + x];
  }

  std::size_t plane_size() const { return width * height; }

  const double* plane(std::size_t c) const { return pix.data() + c * plane_size(); }
  double* plane(std::size_t c) { return pix.data() + c * plane_size(); }

  void clamp01() {
    for (auto& v : pix) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }

  bool in_range01(double tol = 0.0) const {
    for (double v : pix)
      if (v < -tol || v > 1.0 + tol) return false;
    return true;
  }
};

/// Binary PPM (P6) / PGM (P5), 8-bit, maxval 255, linear scaling to [0, 1].
/// write_ppm expects 3 channels, write_pgm expects 1.
void write_ppm(const std::filesystem::path& path, const Image& img);
void write_pgm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
Image read_pgm(const std::filesystem::path& path);

}  // namespace stylebridge
