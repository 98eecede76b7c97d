// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agridet/errors.hpp"

namespace agridet {

namespace {

void require_positive_dims(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) {
    std::ostringstream msg;
    msg << "tensor dimensions must be >= 1, got " << height << "x" << width << "x" << channels;
    throw ShapeError(msg.str());
  }
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

Tensor::Tensor(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  require_positive_dims(height, width, channels);
  values_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

Tensor::Tensor(int height, int width, int channels, std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  require_positive_dims(height, width, channels);
  const auto expected = static_cast<std::size_t>(height) * width * channels;
  if (values_.size() != expected) {
    std::ostringstream msg;
    msg << "tensor value count " << values_.size() << " does not match shape " << height << "x"
        << width << "x" << channels;
    throw ShapeError(msg.str());
  }
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void ConvSpec::validate() const {
  if (kernel != 1 && kernel != 3) throw ConfigError("conv spec: kernel must be 1 or 3");
  if (stride < 1) throw ConfigError("conv spec: stride must be >= 1");
  if (in_channels < 1 || out_channels < 1) {
    throw ConfigError("conv spec: channel counts must be >= 1");
  }
  if (weights.size() != weight_count()) {
    std::ostringstream msg;
    msg << "conv spec: weight count " << weights.size() << " does not match " << kernel << "x"
        << kernel << "x" << in_channels << "x" << out_channels;
    throw ConfigError(msg.str());
  }
  if (bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ConfigError("conv spec: bias count does not match output channels");
  }
}

ConvSpec ConvSpec::random_init(int kernel, int stride, int in_channels, int out_channels,
                               Rng& rng) {
  ConvSpec spec;
  spec.kernel = kernel;
  spec.stride = stride;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  const double scale = 1.0 / std::sqrt(static_cast<double>(kernel) * kernel * in_channels);
  spec.weights.resize(spec.weight_count());
  for (double& w : spec.weights) w = rng.uniform(-scale, scale);
  spec.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
  spec.validate();
  return spec;
}

Tensor conv2d(const Tensor& x, const ConvSpec& spec) {
  spec.validate();
  if (x.channels() != spec.in_channels) {
    std::ostringstream msg;
    msg << "conv2d: input has " << x.channels() << " channels, spec expects "
        << spec.in_channels;
    throw ShapeError(msg.str());
  }
  const int out_h = ceil_div(x.height(), spec.stride);
  const int out_w = ceil_div(x.width(), spec.stride);
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  const int offset = (spec.kernel - 1) / 2;
  Tensor out(out_h, out_w, cout);

  const double* in_data = x.values().data();
  const double* weights = spec.weights.data();
  const double* bias = spec.bias.data();
  double* out_data = out.values().data();
  const std::size_t in_row_stride = static_cast<std::size_t>(x.width()) * cin;
  const std::size_t out_row_stride = static_cast<std::size_t>(out_w) * cout;

#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < out_h; ++oy) {
    double* out_row = out_data + static_cast<std::size_t>(oy) * out_row_stride;
    for (int ox = 0; ox < out_w; ++ox) {
      double* acc = out_row + static_cast<std::size_t>(ox) * cout;
      for (int c = 0; c < cout; ++c) acc[c] = bias[c];
      for (int ky = 0; ky < spec.kernel; ++ky) {
        const int sy = oy * spec.stride + ky - offset;
        if (sy < 0 || sy >= x.height()) continue;
        for (int kx = 0; kx < spec.kernel; ++kx) {
          const int sx = ox * spec.stride + kx - offset;
          if (sx < 0 || sx >= x.width()) continue;
          const double* in_px =
              in_data + static_cast<std::size_t>(sy) * in_row_stride +
              static_cast<std::size_t>(sx) * cin;
          const double* w_tap =
              weights + (static_cast<std::size_t>(ky) * spec.kernel + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = in_px[ci];
            const double* w_row = w_tap + static_cast<std::size_t>(ci) * cout;
            for (int c = 0; c < cout; ++c) acc[c] += v * w_row[c];
          }
        }
      }
    }
  }
  return out;
}

Tensor upsample_nearest_2x(const Tensor& x) {
  Tensor out(2 * x.height(), 2 * x.width(), x.channels());
  const int c = x.channels();
  for (int i = 0; i < x.height(); ++i) {
    for (int j = 0; j < x.width(); ++j) {
      const double* src = x.row_ptr(i, j);
      for (int di = 0; di < 2; ++di) {
        for (int dj = 0; dj < 2; ++dj) {
          double* dst = out.row_ptr(2 * i + di, 2 * j + dj);
          std::copy(src, src + c, dst);
        }
      }
    }
  }
  return out;
}

Tensor add_elementwise(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << "add_elementwise: shape mismatch " << a.height() << "x" << a.width() << "x"
        << a.channels() << " vs " << b.height() << "x" << b.width() << "x" << b.channels();
    throw ShapeError(msg.str());
  }
  Tensor out(a.height(), a.width(), a.channels());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.height(), x.width(), x.channels());
  const auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return out;
}

}  // namespace agridet
