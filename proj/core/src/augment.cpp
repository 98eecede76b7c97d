// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "agridet/errors.hpp"
#include "agridet/random.hpp"

namespace agridet {

namespace {

// Linear-interpolated percentile of the pooled values: rank q/100*(n-1)
// between the adjacent order statistics. Selection instead of a full sort.
double percentile(std::vector<double> values, double q) {
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo),
                   values.end());
  const double v_lo = values[lo];
  if (hi == lo) return v_lo;
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1,
                                        values.end());
  return v_lo + (rank - static_cast<double>(lo)) * (v_hi - v_lo);
}

}  // namespace

void AugmentSpec::validate() const {
  if (!(0.0 <= rescale_lo && rescale_lo < rescale_hi && rescale_hi <= 100.0)) {
    throw ConfigError("augment spec: need 0 <= rescale_lo < rescale_hi <= 100");
  }
  if (!(gamma > 0.0)) throw ConfigError("augment spec: gamma must be > 0");
  if (!(gamma_gain > 0.0)) throw ConfigError("augment spec: gamma gain must be > 0");
  if (!(sigmoid_gain > 0.0)) throw ConfigError("augment spec: sigmoid gain must be > 0");
  if (!(noise_std > 0.0)) throw ConfigError("augment spec: noise std must be > 0");
}

ImageBuffer rescale_intensity(const ImageBuffer& img, double lo_pct, double hi_pct) {
  if (img.empty()) throw InvalidInputError("rescale_intensity: empty image");
  if (!(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0)) {
    throw ConfigError("rescale_intensity: need 0 <= lo < hi <= 100");
  }
  const std::vector<double> pooled(img.values().begin(), img.values().end());
  const double p_lo = percentile(pooled, lo_pct);
  const double p_hi = percentile(pooled, hi_pct);

  ImageBuffer out(img.width(), img.height(), img.channels());
  auto dst = out.values();
  const auto src = img.values();
  if (p_hi == p_lo) {
    return out;  // degenerate span: all zeros
  }
  const double scale = 1.0 / (p_hi - p_lo);
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp((src[i] - p_lo) * scale, 0.0, 1.0);
  }
  return out;
}

ImageBuffer adjust_gamma(const ImageBuffer& img, double gamma, double gain) {
  if (!(gamma > 0.0) || !(gain > 0.0)) {
    throw ConfigError("adjust_gamma: gamma and gain must be > 0");
  }
  ImageBuffer out(img.width(), img.height(), img.channels());
  auto dst = out.values();
  const auto src = img.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp(gain * std::pow(src[i], gamma), 0.0, 1.0);
  }
  return out;
}

ImageBuffer adjust_sigmoid(const ImageBuffer& img, double cutoff, double gain) {
  if (!(gain > 0.0)) throw ConfigError("adjust_sigmoid: gain must be > 0");
  ImageBuffer out(img.width(), img.height(), img.channels());
  auto dst = out.values();
  const auto src = img.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = 1.0 / (1.0 + std::exp(gain * (cutoff - src[i])));
  }
  return out;
}

ImageBuffer add_gaussian_noise(const ImageBuffer& img, double mean, double stddev,
                               std::uint64_t seed) {
  if (!(stddev > 0.0)) throw ConfigError("add_gaussian_noise: std must be > 0");
  Rng rng(seed);
  ImageBuffer out(img.width(), img.height(), img.channels());
  auto dst = out.values();
  const auto src = img.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp(src[i] + rng.normal(mean, stddev), 0.0, 1.0);
  }
  return out;
}

AugmentOutcome augment_dataset(const DatasetManifest& manifest, const AugmentSpec& spec,
                               const std::filesystem::path& out_dir, int jobs) {
  spec.validate();
  if (jobs < 1) throw ConfigError("augment_dataset: jobs must be >= 1");
  std::filesystem::create_directories(out_dir);

  struct Variant {
    const char* suffix;
  };
  static constexpr Variant kVariants[] = {{""}, {"-rescale"}, {"-gamma"}, {"-sigmoid"},
                                          {"-noise"}};

  AugmentOutcome outcome;
  outcome.manifest.split = manifest.split;
  outcome.manifest.classes = manifest.classes;
  outcome.manifest.entries.resize(manifest.entries.size() * std::size(kVariants));
  std::vector<std::uint8_t> produced(outcome.manifest.entries.size(), 0);
  std::mutex error_mutex;

  auto process_entry = [&](std::size_t index) {
    const ManifestEntry& entry = manifest.entries[index];
    try {
      PnmDepth depth = PnmDepth::eight_bit;
      const ImageBuffer source = read_pnm_file(entry.image, &depth);
      const Annotation annotation = read_annotation_file(entry.annotation, manifest.classes);
      const std::string stem = entry.image.stem().string();
      const std::string ext = entry.image.extension().string();

      for (std::size_t v = 0; v < std::size(kVariants); ++v) {
        ImageBuffer variant;
        switch (v) {
          case 0: variant = source; break;
          case 1: variant = rescale_intensity(source, spec.rescale_lo, spec.rescale_hi); break;
          case 2: variant = adjust_gamma(source, spec.gamma, spec.gamma_gain); break;
          case 3: variant = adjust_sigmoid(source, spec.sigmoid_cutoff, spec.sigmoid_gain); break;
          default:
            variant = add_gaussian_noise(source, spec.noise_mean, spec.noise_std,
                                         derive_seed(spec.seed, index));
        }
        const std::string name = stem + kVariants[v].suffix;
        const std::filesystem::path image_path = out_dir / (name + ext);
        const std::filesystem::path ann_path = out_dir / (name + ".xml");
        write_pnm_file(image_path, variant, depth);
        Annotation copy = annotation;
        copy.filename = image_path.filename().string();
        write_annotation_file(ann_path, copy, manifest.classes);
        outcome.manifest.entries[index * std::size(kVariants) + v] = {image_path, ann_path};
        produced[index * std::size(kVariants) + v] = 1;
      }
    } catch (const Error& err) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      outcome.errors.push_back(entry.image.string() + ": " + err.what());
    }
  };

  if (jobs == 1 || manifest.entries.size() < 2) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) process_entry(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int count = std::min<int>(jobs, static_cast<int>(manifest.entries.size()));
    workers.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= manifest.entries.size()) return;
          process_entry(i);
        }
      });
    }
    for (std::thread& w : workers) w.join();
  }

  // Compact away entries whose source failed.
  std::vector<ManifestEntry> kept;
  kept.reserve(outcome.manifest.entries.size());
  for (std::size_t i = 0; i < outcome.manifest.entries.size(); ++i) {
    if (produced[i]) kept.push_back(std::move(outcome.manifest.entries[i]));
  }
  outcome.manifest.entries = std::move(kept);
  std::sort(outcome.errors.begin(), outcome.errors.end());
  return outcome;
}

}  // namespace agridet
