#pragma once

#include <cstdint>
#include <string>

#include "stylebridge/image.hpp"

namespace stylebridge {

inline constexpr std::size_t kGlyphClasses = 10;
inline constexpr std::size_t kGlyphSize = 32;
inline constexpr double kGlyphBackground = 0.9;
inline constexpr double kGlyphInk = 0.1;

/// Class names, index == class id: circle, square, triangle, cross, ring,
/// star, hbar, vbar, diamond, dotgrid.
const char* glyph_class_name(int class_id);

struct GlyphJitter {
  double dx = 0.0;       // pixels, sampled from [-4, 4]
  double dy = 0.0;       // pixels, sampled from [-4, 4]
  double scale = 1.0;    // sampled from [0.7, 1.2]
  double rot_deg = 0.0;  // sampled from [-20, 20]
  double stroke = 1.0;   // stroke-width multiplier for outline-style glyphs
  double ink = kGlyphInk;         // foreground level
  double bg = kGlyphBackground;   // background level
};

/// Rasterize one 32x32x3 glyph. Pure function of its arguments: the same
/// call always produces the same bytes. Zero jitter gives the canonical
/// rendering the knowledge base uses.
Image render_glyph(int class_id, const GlyphJitter& jitter = {});

}  // namespace stylebridge
