#pragma once

#include <filesystem>
#include <vector>

namespace fetalchd {

/// Maximum pixel intensity used throughout the pipeline (and the PNM maxval).
inline constexpr double kPixelMax = 300.0;

/// Planar image buffer: channel-major, then row-major.
/// index = (c * height + row) * width + col.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pix;

  Image() = default;
  Image(int h, int w, int c = 1)
      : height(h), width(w), channels(c),
        pix(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int c, int r, int col) {
    return pix[(static_cast<std::size_t>(c) * height + r) * width + col];
  }
  double at(int c, int r, int col) const {
    return pix[(static_cast<std::size_t>(c) * height + r) * width + col];
  }
  std::size_t numel() const { return pix.size(); }
};

/// Bilinear resize of every channel. Uses the half-pixel-center convention;
/// output values stay inside the input value range.
Image resize_bilinear(const Image& src, int out_h, int out_w);

/// Mean across channels; identity for single-channel input.
Image channel_average(const Image& src);

/// Writes a binary PGM (1 channel) or PPM (3 channels) with maxval 300 and
/// big-endian 2-byte samples. Pixel values must be integral and in
/// [0, kPixelMax]; anything else throws.
void write_pnm(const Image& img, const std::filesystem::path& path);

/// Reads a file written by write_pnm (also accepts maxval<=65535 P5/P6 in
/// general). Round-trips write_pnm output bit-exactly.
Image read_pnm(const std::filesystem::path& path);

}  // namespace fetalchd
