#include "stylebridge/fourier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stylebridge {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_pow2(std::size_t width, std::size_t height) {
  if (!is_power_of_two(width) || !is_power_of_two(height))
    throw std::invalid_argument("fft: extents must be powers of two, got " +
                                std::to_string(width) + "x" + std::to_string(height));
}

// Iterative radix-2 Cooley-Tukey with a fresh twiddle table per stage length.
// Tables are evaluated directly (no incremental twiddle product), which keeps
// the error comfortably below the 1e-10 oracle tolerance at these sizes.
void fft_1d(std::complex<double>* a, std::size_t n, bool inverse) {
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<std::complex<double>> tw(n / 2);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double sign = inverse ? 1.0 : -1.0;
    const std::size_t half = len / 2;
    for (std::size_t j = 0; j < half; ++j)
      tw[j] = std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(j) / static_cast<double>(len));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + half] * tw[j];
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

void fft_2d_inplace(ComplexPlane& p, bool inverse) {
  std::vector<std::complex<double>> col(p.height);
  for (std::size_t v = 0; v < p.height; ++v) fft_1d(p.bins.data() + v * p.width, p.width, inverse);
  for (std::size_t u = 0; u < p.width; ++u) {
    for (std::size_t v = 0; v < p.height; ++v) col[v] = p.at(v, u);
    fft_1d(col.data(), p.height, inverse);
    for (std::size_t v = 0; v < p.height; ++v) p.at(v, u) = col[v];
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

ComplexPlane fft2(const double* plane, std::size_t width, std::size_t height) {
  check_pow2(width, height);
  ComplexPlane out(width, height);
  for (std::size_t i = 0; i < width * height; ++i) out.bins[i] = {plane[i], 0.0};
  fft_2d_inplace(out, false);
  return out;
}

ComplexPlane fft2(const std::vector<double>& plane, std::size_t width, std::size_t height) {
  if (plane.size() != width * height) throw std::invalid_argument("fft2: plane size mismatch");
  return fft2(plane.data(), width, height);
}

ComplexPlane ifft2(const ComplexPlane& spec) {
  check_pow2(spec.width, spec.height);
  ComplexPlane out = spec;
  fft_2d_inplace(out, true);
  const double inv = 1.0 / static_cast<double>(spec.width * spec.height);
  for (auto& b : out.bins) b *= inv;
  return out;
}

std::vector<double> ifft2_real(const ComplexPlane& spec, double max_imag) {
  const ComplexPlane full = ifft2(spec);
  double residue = 0.0;
  for (const auto& b : full.bins) residue = std::max(residue, std::abs(b.imag()));
  if (residue > max_imag)
    throw std::runtime_error("ifft2_real: imaginary residue " + std::to_string(residue) +
                             " exceeds " + std::to_string(max_imag));
  std::vector<double> out(full.bins.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = full.bins[i].real();
  return out;
}

std::vector<double> amplitude(const ComplexPlane& spec) {
  std::vector<double> out(spec.bins.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::hypot(spec.bins[i].real(), spec.bins[i].imag());
  return out;
}

std::vector<double> phase(const ComplexPlane& spec) {
  std::vector<double> out(spec.bins.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::atan2(spec.bins[i].imag(), spec.bins[i].real());
  return out;
}

ComplexPlane compose(const std::vector<double>& amplitude, const std::vector<double>& phase,
                     std::size_t width, std::size_t height) {
  if (amplitude.size() != width * height || phase.size() != width * height)
    throw std::invalid_argument("compose: view size mismatch");
  ComplexPlane out(width, height);
  for (std::size_t i = 0; i < out.bins.size(); ++i)
    out.bins[i] = std::polar(amplitude[i], phase[i]);
  return out;
}

Spectrum analyze(const Image& img) {
  check_pow2(img.width, img.height);
  Spectrum s;
  s.width = img.width;
  s.height = img.height;
  s.planes.reserve(img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    s.planes.push_back(fft2(img.plane(c), img.width, img.height));
  return s;
}

bool in_swap_window(std::size_t u, std::size_t v, std::size_t width, std::size_t height,
                    double beta) {
  const double hu = beta * (static_cast<double>(width) / 2.0);
  const double hv = beta * (static_cast<double>(height) / 2.0);
  const double cu = static_cast<double>(centered_freq(u, width));
  const double cv = static_cast<double>(centered_freq(v, height));
  return cu >= -hu && cu < hu && cv >= -hv && cv < hv;
}

ComplexPlane spliced_spectrum(const ComplexPlane& content, const ComplexPlane& style,
                              double beta) {
  if (content.width != style.width || content.height != style.height)
    throw std::invalid_argument("spliced_spectrum: plane dimensions differ");
  const std::size_t W = content.width, H = content.height;

  // Both images are real, so their spectra are Hermitian and the splice must
  // stay Hermitian for the inverse to be real. Each conjugate pair is
  // computed once from its canonical bin and mirrored; a pair is swapped only
  // when both members lie in the window (at beta = 1 that is every bin).
  ComplexPlane out = content;
  for (std::size_t v = 0; v < H; ++v) {
    for (std::size_t u = 0; u < W; ++u) {
      const std::size_t u2 = (W - u) % W;
      const std::size_t v2 = (H - v) % H;
      if (std::make_pair(v, u) > std::make_pair(v2, u2)) continue;  // partner writes it
      if (!in_swap_window(u, v, W, H, beta) || !in_swap_window(u2, v2, W, H, beta)) continue;

      const std::complex<double> fc = content.at(v, u);
      const double amp_s = std::hypot(style.at(v, u).real(), style.at(v, u).imag());
      if (u == u2 && v == v2) {
        // self-conjugate bin: must be real, keep the content sign
        out.at(v, u) = {fc.real() < 0.0 ? -amp_s : amp_s, 0.0};
        continue;
      }
      const double amp_c = std::hypot(fc.real(), fc.imag());
      const std::complex<double> g = amp_c > 0.0 ? fc * (amp_s / amp_c)
                                                 : std::complex<double>{amp_s, 0.0};
      out.at(v, u) = g;
      out.at(v2, u2) = std::conj(g);
    }
  }
  return out;
}

Image style_inject(const Image& content, const Image& style, double beta) {
  if (content.width != style.width || content.height != style.height ||
      content.channels != style.channels)
    throw std::invalid_argument("style_inject: image dimensions or channels differ");
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("style_inject: beta must lie in [0, 1]");
  check_pow2(content.width, content.height);

  Image out(content.width, content.height, content.channels);
  for (std::size_t c = 0; c < content.channels; ++c) {
    const ComplexPlane fc = fft2(content.plane(c), content.width, content.height);
    const ComplexPlane fs = fft2(style.plane(c), style.width, style.height);
    const std::vector<double> mixed = ifft2_real(spliced_spectrum(fc, fs, beta));
    double* dst = out.plane(c);
    for (std::size_t i = 0; i < mixed.size(); ++i) dst[i] = mixed[i];
  }
  out.clamp01();
  return out;
}

}  // namespace stylebridge
