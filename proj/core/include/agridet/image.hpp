// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agridet/geometry.hpp"

namespace agridet {

/// Interleaved raster with values normalized to [0,1], stored row-major as
/// (row, col, channel). Channel count is 1, 3, or 4.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels);  // zero-filled
  ImageBuffer(int width, int height, int channels, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double at(int row, int col, int channel) const {
    return values_[index(row, col, channel)];
  }
  double& at(int row, int col, int channel) { return values_[index(row, col, channel)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool in_range() const;  // every value within [0,1]

 private:
  std::size_t index(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + channel;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

enum class PnmDepth { eight_bit, sixteen_bit };

/// Binary portable graymap (P5, one channel) or pixmap (P6, three
/// channels), 8- or 16-bit. Values are scaled to [0,1] by the file's max
/// value; 16-bit samples are most-significant-byte first. Throws IoError
/// on bad magic or truncated payload; the buffer is only produced once the
/// whole raster has been read.
ImageBuffer read_pnm(std::istream& in, PnmDepth* depth = nullptr);
ImageBuffer read_pnm_file(const std::filesystem::path& path, PnmDepth* depth = nullptr);

/// Inverse of read_pnm at the same bit depth: values are quantized to
/// round(v * maxval).
void write_pnm(std::ostream& out, const ImageBuffer& img, PnmDepth depth = PnmDepth::eight_bit);
void write_pnm_file(const std::filesystem::path& path, const ImageBuffer& img,
                    PnmDepth depth = PnmDepth::eight_bit);

enum class Band { G = 0, R = 1, RE = 2, NIR = 3 };

/// Ordered band triple such as R-G-NIR. No duplicates.
struct BandSelection {
  std::array<Band, 3> bands;

  static BandSelection parse(std::string_view text);  // e.g. "R-G-NIR"
  std::string to_string() const;
  void validate() const;  // throws ConfigError on duplicates
};

/// Stack three of the four single-channel bands into a 3-channel image;
/// channel i of the output is the band sel.bands[i]. All four inputs must
/// share dimensions (they are assumed pre-aligned).
ImageBuffer compose_bands(const ImageBuffer& g, const ImageBuffer& r, const ImageBuffer& re,
                          const ImageBuffer& nir, const BandSelection& sel);

ImageBuffer extract_channel(const ImageBuffer& img, int channel);

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

inline constexpr Rgb kHealthyColor{0.0, 0.0, 1.0};   // blue
inline constexpr Rgb kStressedColor{1.0, 1.0, 0.0};  // yellow

/// Paint the box outline, `thickness` pixels wide just inside the box
/// under the rasterize pixel convention, clipped to the image.
void draw_box_outline(ImageBuffer& img, const Box& box, const Rgb& color, int thickness = 2);

}  // namespace agridet
