#include "fetalchd/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "fetalchd/errors.hpp"

namespace fetalchd {

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_bilinear: output dims must be positive");
  Image out(out_h, out_w, src.channels);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int c = 0; c < src.channels; ++c) {
    for (int r = 0; r < out_h; ++r) {
      double fy = (r + 0.5) * sy - 0.5;
      if (fy < 0) fy = 0;
      int r0 = static_cast<int>(fy);
      if (r0 > src.height - 2) r0 = src.height - 2;
      if (r0 < 0) r0 = 0;
      const double wy = std::min(std::max(fy - r0, 0.0), 1.0);
      for (int col = 0; col < out_w; ++col) {
        double fx = (col + 0.5) * sx - 0.5;
        if (fx < 0) fx = 0;
        int c0 = static_cast<int>(fx);
        if (c0 > src.width - 2) c0 = src.width - 2;
        if (c0 < 0) c0 = 0;
        const double wx = std::min(std::max(fx - c0, 0.0), 1.0);
        const double v00 = src.at(c, r0, c0);
        const double v01 = src.at(c, r0, c0 + 1);
        const double v10 = src.at(c, r0 + 1, c0);
        const double v11 = src.at(c, r0 + 1, c0 + 1);
        out.at(c, r, col) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                            wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
  return out;
}

Image channel_average(const Image& src) {
  if (src.channels == 1) return src;
  Image out(src.height, src.width, 1);
  for (int r = 0; r < src.height; ++r) {
    for (int col = 0; col < src.width; ++col) {
      double s = 0.0;
      for (int c = 0; c < src.channels; ++c) s += src.at(c, r, col);
      out.at(0, r, col) = s / src.channels;
    }
  }
  return out;
}

void write_pnm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_pnm: image must have 1 or 3 channels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_pnm: cannot open " + path.string());
  f << (img.channels == 1 ? "P5" : "P6") << "\n"
    << img.width << " " << img.height << "\n"
    << static_cast<int>(kPixelMax) << "\n";
  std::vector<unsigned char> raster;
  raster.reserve(img.numel() * 2);
  for (int r = 0; r < img.height; ++r) {
    for (int col = 0; col < img.width; ++col) {
      for (int c = 0; c < img.channels; ++c) {
        const double v = img.at(c, r, col);
        if (!(v >= 0.0 && v <= kPixelMax) || v != std::floor(v))
          throw std::invalid_argument(
              "write_pnm: pixel values must be integers in [0,300]");
        const auto s = static_cast<std::uint16_t>(v);
        raster.push_back(static_cast<unsigned char>(s >> 8));
        raster.push_back(static_cast<unsigned char>(s & 0xff));
      }
    }
  }
  f.write(reinterpret_cast<const char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (!f) throw IoError("write_pnm: write failed for " + path.string());
}

namespace {

int next_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments, then parses a decimal integer.
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  if (ch == EOF || !std::isdigit(ch)) throw IoError("read_pnm: malformed header");
  int value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    ch = in.get();
  }
  return value;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pnm: cannot open " + path.string());
  char magic[2];
  f.read(magic, 2);
  if (!f || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw IoError("read_pnm: not a binary PGM/PPM file: " + path.string());
  const int channels = magic[1] == '5' ? 1 : 3;
  const int width = next_pnm_token(f);
  const int height = next_pnm_token(f);
  const int maxval = next_pnm_token(f);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
    throw IoError("read_pnm: bad dimensions in " + path.string());
  const bool two_byte = maxval > 255;
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  std::vector<unsigned char> raster(n * (two_byte ? 2 : 1));
  f.read(reinterpret_cast<char*>(raster.data()),
         static_cast<std::streamsize>(raster.size()));
  if (!f) throw IoError("read_pnm: truncated raster in " + path.string());
  Image img(height, width, channels);
  std::size_t k = 0;
  for (int r = 0; r < height; ++r) {
    for (int col = 0; col < width; ++col) {
      for (int c = 0; c < channels; ++c) {
        std::uint16_t s;
        if (two_byte) {
          s = static_cast<std::uint16_t>((raster[k] << 8) | raster[k + 1]);
          k += 2;
        } else {
          s = raster[k++];
        }
        img.at(c, r, col) = static_cast<double>(s);
      }
    }
  }
  return img;
}

}  // namespace fetalchd
