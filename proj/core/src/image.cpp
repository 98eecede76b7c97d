// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "agridet/errors.hpp"

namespace agridet {

namespace {

void require_image_dims(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    std::ostringstream msg;
    msg << "image dimensions must be positive, got " << width << "x" << height;
    throw InvalidInputError(msg.str());
  }
  if (channels != 1 && channels != 3 && channels != 4) {
    throw InvalidInputError("image channel count must be 1, 3, or 4");
  }
}

// Reads the next PNM header token, skipping whitespace and '#' comments.
std::string next_pnm_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c != EOF) in.unget();  // leave the terminator for the caller
  if (token.empty()) throw IoError("pnm: truncated header");
  return token;
}

int parse_pnm_int(std::istream& in, const char* field) {
  const std::string token = next_pnm_token(in);
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw IoError(std::string("pnm: non-numeric ") + field + " '" + token + "'");
  }
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  require_image_dims(width, height, channels);
  values_.assign(static_cast<std::size_t>(width) * height * channels, 0.0);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<double> values)
    : width_(width), height_(height), channels_(channels), values_(std::move(values)) {
  require_image_dims(width, height, channels);
  const auto expected = static_cast<std::size_t>(width) * height * channels;
  if (values_.size() != expected) {
    throw InvalidInputError("image value count does not match dimensions");
  }
  if (!in_range()) throw InvalidInputError("image values must lie in [0,1]");
}

bool ImageBuffer::in_range() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

ImageBuffer read_pnm(std::istream& in, PnmDepth* depth) {
  const std::string magic = next_pnm_token(in);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError("pnm: bad magic '" + magic + "' (expected P5 or P6)");
  }
  const int width = parse_pnm_int(in, "width");
  const int height = parse_pnm_int(in, "height");
  const int maxval = parse_pnm_int(in, "maxval");
  if (width < 1 || height < 1) throw IoError("pnm: nonpositive dimensions");
  if (maxval < 1 || maxval > 65535) throw IoError("pnm: maxval out of range");
  in.get();  // single whitespace byte separating header and raster

  const bool wide = maxval > 255;
  if (depth) *depth = wide ? PnmDepth::sixteen_bit : PnmDepth::eight_bit;
  const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
  std::vector<char> raw(samples * (wide ? 2 : 1));
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw IoError("pnm: truncated payload");
  }

  std::vector<double> values(samples);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::size_t i = 0; i < samples; ++i) {
    int raw_value;
    if (wide) {
      raw_value = (bytes[2 * i] << 8) | bytes[2 * i + 1];
    } else {
      raw_value = bytes[i];
    }
    if (raw_value > maxval) throw IoError("pnm: sample exceeds declared maxval");
    values[i] = static_cast<double>(raw_value) / maxval;
  }
  return ImageBuffer(width, height, channels, std::move(values));
}

ImageBuffer read_pnm_file(const std::filesystem::path& path, PnmDepth* depth) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file " + path.string());
  return read_pnm(in, depth);
}

void write_pnm(std::ostream& out, const ImageBuffer& img, PnmDepth depth) {
  if (img.empty()) throw InvalidInputError("write_pnm: empty image");
  if (img.channels() != 1 && img.channels() != 3) {
    throw IoError("pnm: only 1- or 3-channel images can be written");
  }
  const int maxval = depth == PnmDepth::eight_bit ? 255 : 65535;
  out << (img.channels() == 1 ? "P5" : "P6") << "\n"
      << img.width() << " " << img.height() << "\n"
      << maxval << "\n";
  const auto values = img.values();
  std::vector<char> raw(values.size() * (depth == PnmDepth::eight_bit ? 1 : 2));
  auto* bytes = reinterpret_cast<unsigned char*>(raw.data());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const long quantized =
        std::clamp(std::lround(values[i] * maxval), 0L, static_cast<long>(maxval));
    if (depth == PnmDepth::eight_bit) {
      bytes[i] = static_cast<unsigned char>(quantized);
    } else {
      bytes[2 * i] = static_cast<unsigned char>(quantized >> 8);
      bytes[2 * i + 1] = static_cast<unsigned char>(quantized & 0xFF);
    }
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("pnm: write failed");
}

void write_pnm_file(const std::filesystem::path& path, const ImageBuffer& img, PnmDepth depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create image file " + path.string());
  write_pnm(out, img, depth);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

BandSelection BandSelection::parse(std::string_view text) {
  BandSelection sel{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t dash = text.find('-', pos);
    const std::string_view part =
        i < 2 ? text.substr(pos, dash == std::string_view::npos ? dash : dash - pos)
              : text.substr(pos);
    if (part == "G") {
      sel.bands[i] = Band::G;
    } else if (part == "R") {
      sel.bands[i] = Band::R;
    } else if (part == "RE") {
      sel.bands[i] = Band::RE;
    } else if (part == "NIR") {
      sel.bands[i] = Band::NIR;
    } else {
      throw ConfigError("band selection: unknown band '" + std::string(part) + "' in '" +
                        std::string(text) + "'");
    }
    if (i < 2) {
      if (dash == std::string_view::npos) {
        throw ConfigError("band selection '" + std::string(text) +
                          "' must name three dash-separated bands");
      }
      pos = dash + 1;
    }
  }
  sel.validate();
  return sel;
}

std::string BandSelection::to_string() const {
  static const char* names[] = {"G", "R", "RE", "NIR"};
  std::string out;
  for (int i = 0; i < 3; ++i) {
    if (i) out += "-";
    out += names[static_cast<int>(bands[i])];
  }
  return out;
}

void BandSelection::validate() const {
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (bands[i] == bands[j]) {
        throw ConfigError("band selection '" + to_string() + "' contains a duplicate band");
      }
    }
  }
}

ImageBuffer compose_bands(const ImageBuffer& g, const ImageBuffer& r, const ImageBuffer& re,
                          const ImageBuffer& nir, const BandSelection& sel) {
  sel.validate();
  const ImageBuffer* inputs[] = {&g, &r, &re, &nir};
  for (const ImageBuffer* band : inputs) {
    if (band->channels() != 1) {
      throw ShapeError("compose_bands: band images must be single-channel");
    }
    if (band->width() != g.width() || band->height() != g.height()) {
      std::ostringstream msg;
      msg << "compose_bands: band dimensions differ (" << band->width() << "x"
          << band->height() << " vs " << g.width() << "x" << g.height() << ")";
      throw ShapeError(msg.str());
    }
  }
  ImageBuffer out(g.width(), g.height(), 3);
  for (int i = 0; i < g.height(); ++i) {
    for (int j = 0; j < g.width(); ++j) {
      for (int c = 0; c < 3; ++c) {
        out.at(i, j, c) = inputs[static_cast<int>(sel.bands[c])]->at(i, j, 0);
      }
    }
  }
  return out;
}

ImageBuffer extract_channel(const ImageBuffer& img, int channel) {
  if (channel < 0 || channel >= img.channels()) {
    throw InvalidInputError("extract_channel: channel index out of range");
  }
  ImageBuffer out(img.width(), img.height(), 1);
  for (int i = 0; i < img.height(); ++i) {
    for (int j = 0; j < img.width(); ++j) out.at(i, j, 0) = img.at(i, j, channel);
  }
  return out;
}

void draw_box_outline(ImageBuffer& img, const Box& box, const Rgb& color, int thickness) {
  if (img.channels() != 3) throw ShapeError("draw_box_outline: image must have 3 channels");
  if (thickness < 1) throw InvalidInputError("draw_box_outline: thickness must be >= 1");
  const int x0 = static_cast<int>(std::floor(box.xmin));
  const int x1 = static_cast<int>(std::floor(box.xmax));
  const int y0 = static_cast<int>(std::floor(box.ymin));
  const int y1 = static_cast<int>(std::floor(box.ymax));
  const int cx0 = std::clamp(x0, 0, img.width());
  const int cx1 = std::clamp(x1, 0, img.width());
  const int cy0 = std::clamp(y0, 0, img.height());
  const int cy1 = std::clamp(y1, 0, img.height());
  for (int i = cy0; i < cy1; ++i) {
    for (int j = cx0; j < cx1; ++j) {
      const bool on_edge = i - y0 < thickness || y1 - 1 - i < thickness ||
                           j - x0 < thickness || x1 - 1 - j < thickness;
      if (!on_edge) continue;
      img.at(i, j, 0) = color.r;
      img.at(i, j, 1) = color.g;
      img.at(i, j, 2) = color.b;
    }
  }
}

}  // namespace agridet
