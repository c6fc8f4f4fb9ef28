#include "stylebridge/glyphs.hpp"

#include <cmath>
#include <stdexcept>

namespace stylebridge {

namespace {

constexpr double kDeg2Rad = 3.14159265358979323846 / 180.0;

// Inside tests work in canonical glyph coordinates: origin at the image
// center, y pointing down, units of pixels at the 32x32 base size.
bool inside_triangle(double x, double y) {
  // vertices (0,-12), (-11.5, 9), (11.5, 9)
  auto edge = [](double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  };
  const double e0 = edge(0, -12, -11.5, 9, x, y);
  const double e1 = edge(-11.5, 9, 11.5, 9, x, y);
  const double e2 = edge(11.5, 9, 0, -12, x, y);
  return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

bool inside_star(double x, double y) {
  // even-odd test against a 10-vertex star polygon, outer 13, inner 5.4
  constexpr int kVerts = 10;
  double vx[kVerts], vy[kVerts];
  for (int i = 0; i < kVerts; ++i) {
    const double r = (i % 2 == 0) ? 13.0 : 5.4;
    const double a = -90.0 * kDeg2Rad + i * (36.0 * kDeg2Rad);
    vx[i] = r * std::cos(a);
    vy[i] = r * std::sin(a);
  }
  bool in = false;
  for (int i = 0, j = kVerts - 1; i < kVerts; j = i++) {
    if ((vy[i] > y) != (vy[j] > y) &&
        x < (vx[j] - vx[i]) * (y - vy[i]) / (vy[j] - vy[i]) + vx[i])
      in = !in;
  }
  return in;
}

bool glyph_inside(int cls, double x, double y, double stroke) {
  const double r = std::hypot(x, y);
  switch (cls) {
    case 0:  // circle
      return r <= 11.0;
    case 1:  // square
      return std::max(std::abs(x), std::abs(y)) <= 9.0;
    case 2:  // triangle
      return inside_triangle(x, y);
    case 3:  // cross
      return (std::abs(x) <= 3.5 * stroke && std::abs(y) <= 12.0) ||
             (std::abs(y) <= 3.5 * stroke && std::abs(x) <= 12.0);
    case 4:  // ring
      return r <= 12.0 && r >= 12.0 - 5.0 * stroke;
    case 5:  // star
      return inside_star(x, y);
    case 6:  // hbar
      return std::abs(x) <= 12.0 && std::abs(y) <= 4.0 * stroke;
    case 7:  // vbar
      return std::abs(x) <= 4.0 * stroke && std::abs(y) <= 12.0;
    case 8:  // diamond
      return std::abs(x) + std::abs(y) <= 12.5;
    case 9: {  // dotgrid
      for (int gy = -1; gy <= 1; ++gy)
        for (int gx = -1; gx <= 1; ++gx)
          if (std::hypot(x - 8.0 * gx, y - 8.0 * gy) <= 2.8 * stroke) return true;
      return false;
    }
    default:
      return false;
  }
}

}  // namespace

const char* glyph_class_name(int class_id) {
  static const char* names[kGlyphClasses] = {"circle", "square", "triangle", "cross",   "ring",
                                             "star",   "hbar",   "vbar",     "diamond", "dotgrid"};
  if (class_id < 0 || class_id >= static_cast<int>(kGlyphClasses))
    throw std::invalid_argument("glyph class id out of range: " + std::to_string(class_id));
  return names[class_id];
}

Image render_glyph(int class_id, const GlyphJitter& jitter) {
  if (class_id < 0 || class_id >= static_cast<int>(kGlyphClasses))
    throw std::invalid_argument("glyph class id out of range: " + std::to_string(class_id));
  if (!(jitter.scale > 0.0)) throw std::invalid_argument("glyph scale must be positive");
  if (jitter.ink < 0.0 || jitter.ink > 1.0 || jitter.bg < 0.0 || jitter.bg > 1.0)
    throw std::invalid_argument("glyph ink/background levels must lie in [0, 1]");

  const double half = static_cast<double>(kGlyphSize) / 2.0;
  const double cos_r = std::cos(-jitter.rot_deg * kDeg2Rad);
  const double sin_r = std::sin(-jitter.rot_deg * kDeg2Rad);
  const double inv_scale = 1.0 / jitter.scale;

  Image img(kGlyphSize, kGlyphSize, 3, jitter.bg);

  // 2x2 supersampling for soft edges
  constexpr int kSub = 2;
  constexpr double kSubStep = 1.0 / kSub;
  for (std::size_t py = 0; py < kGlyphSize; ++py) {
    for (std::size_t px = 0; px < kGlyphSize; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double ix = static_cast<double>(px) + (sx + 0.5) * kSubStep - half - jitter.dx;
          const double iy = static_cast<double>(py) + (sy + 0.5) * kSubStep - half - jitter.dy;
          const double gx = (cos_r * ix - sin_r * iy) * inv_scale;
          const double gy = (sin_r * ix + cos_r * iy) * inv_scale;
          if (glyph_inside(class_id, gx, gy, jitter.stroke)) ++hits;
        }
      }
      if (hits > 0) {
        const double cover = static_cast<double>(hits) / (kSub * kSub);
        const double v = jitter.bg + cover * (jitter.ink - jitter.bg);
        for (std::size_t c = 0; c < 3; ++c) img.at(c, py, px) = v;
      }
    }
  }
  return img;
}

}  // namespace stylebridge
