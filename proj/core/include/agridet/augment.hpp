// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agridet/dataio.hpp"
#include "agridet/image.hpp"

namespace agridet {

/// Parameters of the four photometric augmentations. The defaults are the
/// pipeline's fixed operating point; every run of a given spec (seed
/// included) is bitwise reproducible.
struct AugmentSpec {
  double rescale_lo = 0.2;   // lower percentile
  double rescale_hi = 99.8;  // upper percentile
  double gamma = 0.8;
  double gamma_gain = 0.8;
  double sigmoid_cutoff = 0.5;
  double sigmoid_gain = 10.0;
  double noise_mean = 0.0;
  double noise_std = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// Linear contrast stretch between the lo/hi percentiles of the image
/// (all channels pooled, linear-interpolated percentiles), clamped to
/// [0,1]. A constant image maps to all zeros.
ImageBuffer rescale_intensity(const ImageBuffer& img, double lo_pct = 0.2,
                              double hi_pct = 99.8);

/// out = clamp(gain * v^gamma, 0, 1), elementwise.
ImageBuffer adjust_gamma(const ImageBuffer& img, double gamma = 0.8, double gain = 0.8);

/// out = 1 / (1 + exp(gain * (cutoff - v))), elementwise.
ImageBuffer adjust_sigmoid(const ImageBuffer& img, double cutoff = 0.5, double gain = 10.0);

/// Adds i.i.d. Normal(mean, std) noise per sample from a seeded generator,
/// clamped back to [0,1]. The same seed reproduces the output bitwise.
ImageBuffer add_gaussian_noise(const ImageBuffer& img, double mean, double stddev,
                               std::uint64_t seed);

struct AugmentOutcome {
  DatasetManifest manifest;          // original + the four variants per entry
  std::vector<std::string> errors;   // per-file failures; processing continues
};

/// Materialize the original plus the four augmented variants of every
/// manifest entry under out_dir (suffixes -rescale, -gamma, -sigmoid,
/// -noise). Annotations are copied with only the filename updated: all
/// four transforms are photometric and leave box geometry untouched.
/// Per-image noise seeds derive from (spec.seed, entry index), so results
/// do not depend on execution order; jobs > 1 fans images out over
/// threads.
AugmentOutcome augment_dataset(const DatasetManifest& manifest, const AugmentSpec& spec,
                               const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace agridet
