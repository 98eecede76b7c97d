// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "agridet/random.hpp"

namespace agridet {

/// Dense rank-3 feature map stored row-major as (row, col, channel).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels);  // zero-initialized
  Tensor(int height, int width, int channels, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double at(int row, int col, int channel) const {
    return values_[index(row, col, channel)];
  }
  double& at(int row, int col, int channel) { return values_[index(row, col, channel)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* row_ptr(int row, int col = 0) const {
    return values_.data() + index(row, col, 0);
  }
  double* row_ptr(int row, int col = 0) { return values_.data() + index(row, col, 0); }

  bool same_shape(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool all_finite() const;

 private:
  std::size_t index(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + channel;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

/// Convolution parameters. Weights are stored (ky, kx, in, out) row-major;
/// bias has one entry per output channel. Padding is half padding: the
/// output spatial size is ceil(input / stride) and the tap at output cell o
/// is centered on input cell o*stride.
struct ConvSpec {
  int kernel = 3;  // 1 or 3
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels;
  }
  void validate() const;  // throws ConfigError on malformed specs

  /// Uniform init in +-1/sqrt(fan_in), zero bias. Deterministic per rng state.
  static ConvSpec random_init(int kernel, int stride, int in_channels, int out_channels,
                              Rng& rng);
};

/// Cross-correlation with zero half-padding; throws ShapeError when the
/// input channel count does not match the spec.
Tensor conv2d(const Tensor& x, const ConvSpec& spec);

/// (H, W, C) -> (2H, 2W, C), each value replicated into a 2x2 block.
Tensor upsample_nearest_2x(const Tensor& x);

/// Pointwise sum; shapes must match exactly.
Tensor add_elementwise(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);

}  // namespace agridet
