#pragma once

#include <complex>
#include <vector>

#include "stylebridge/image.hpp"

namespace stylebridge {

/// One channel's 2D frequency plane, row-major bins[v * width + u].
/// Forward transform is unnormalized (X[k] = sum x[n] e^{-2pi i kn/N});
/// the inverse carries the full 1/(W*H).
struct ComplexPlane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::complex<double>> bins;

  ComplexPlane() = default;
  ComplexPlane(std::size_t w, std::size_t h) : width(w), height(h), bins(w * h) {}

  std::complex<double>& at(std::size_t v, std::size_t u) { return bins[v * width + u]; }
  const std::complex<double>& at(std::size_t v, std::size_t u) const { return bins[v * width + u]; }
};

/// Per-channel spectrum of an image, plus amplitude/phase views.
struct Spectrum {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<ComplexPlane> planes;
};

bool is_power_of_two(std::size_t n);

/// Forward 2D FFT of one real plane. Extents must be powers of two.
ComplexPlane fft2(const double* plane, std::size_t width, std::size_t height);
ComplexPlane fft2(const std::vector<double>& plane, std::size_t width, std::size_t height);

/// Inverse 2D FFT with 1/(W*H) normalization, keeping the complex result.
ComplexPlane ifft2(const ComplexPlane& spec);

/// Inverse transform of a (numerically) Hermitian spectrum. Throws if the
/// imaginary residue exceeds max_imag; the residue is then discarded.
std::vector<double> ifft2_real(const ComplexPlane& spec, double max_imag = 1e-6);

std::vector<double> amplitude(const ComplexPlane& spec);
std::vector<double> phase(const ComplexPlane& spec);
ComplexPlane compose(const std::vector<double>& amplitude, const std::vector<double>& phase,
                     std::size_t width, std::size_t height);

Spectrum analyze(const Image& img);

/// Centered frequency coordinate after an fftshift-style reindexing:
/// u in [0, n) maps to [-n/2, n/2).
inline long centered_freq(std::size_t u, std::size_t n) {
  return u < n / 2 ? static_cast<long>(u) : static_cast<long>(u) - static_cast<long>(n);
}

/// True when bin (u, v) lies in the centered low-frequency square of
/// half-width beta * (extent / 2). Bounds are half-open on both sides, so
/// beta = 1 covers every bin exactly once and beta = 0 covers none.
bool in_swap_window(std::size_t u, std::size_t v, std::size_t width, std::size_t height,
                    double beta);

/// Amplitude-spectrum replacement: per channel, bins inside the swap window
/// take the style image's amplitude and keep the content image's phase; all
/// other bins keep the content spectrum. The result is inverse-transformed
/// and clamped to [0, 1].
Image style_inject(const Image& content, const Image& style, double beta);

/// The spliced spectrum style_inject inverts, exposed for contract checks.
ComplexPlane spliced_spectrum(const ComplexPlane& content, const ComplexPlane& style, double beta);

}  // namespace stylebridge
