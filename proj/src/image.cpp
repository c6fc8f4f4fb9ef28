#include "stylebridge/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

namespace stylebridge {

namespace {

std::uint8_t to_byte(double v) {
  double s = std::lround(v * 255.0);
  if (s < 0) s = 0;
  if (s > 255) s = 255;
  return static_cast<std::uint8_t>(s);
}

void write_pnm(const std::filesystem::path& path, const Image& img, bool color) {
  const std::size_t want = color ? 3 : 1;
  if (img.channels != want)
    throw std::invalid_argument("pnm write: image has " + std::to_string(img.channels) +
                                " channels, format needs " + std::to_string(want));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << (color ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(img.width * want);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < want; ++c) row[x * want + c] = to_byte(img.at(c, y, x));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("bad PNM header");
  return value;
}

Image read_pnm(const std::filesystem::path& path, bool color) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  in >> magic;
  const std::string want = color ? "P6" : "P5";
  if (magic != want)
    throw std::runtime_error(path.string() + ": expected " + want + " header, got '" + magic + "'");
  const int w = read_pnm_token(in);
  const int h = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (w <= 0 || h <= 0) throw std::runtime_error(path.string() + ": bad dimensions");
  if (maxval != 255) throw std::runtime_error(path.string() + ": only maxval 255 supported");
  in.get();  // single whitespace byte after the header
  const std::size_t ch = color ? 3 : 1;
  Image img(static_cast<std::size_t>(w), static_cast<std::size_t>(h), ch);
  std::vector<std::uint8_t> row(img.width * ch);
  for (std::size_t y = 0; y < img.height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < ch; ++c)
        img.at(c, y, x) = static_cast<double>(row[x * ch + c]) / 255.0;
  }
  return img;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& img) { write_pnm(path, img, true); }
void write_pgm(const std::filesystem::path& path, const Image& img) { write_pnm(path, img, false); }
Image read_ppm(const std::filesystem::path& path) { return read_pnm(path, true); }
Image read_pgm(const std::filesystem::path& path) { return read_pnm(path, false); }

}  // namespace stylebridge
