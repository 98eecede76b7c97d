// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "agridet/errors.hpp"
#include "agridet/random.hpp"

namespace testsupport {

using namespace agridet;

std::filesystem::path unique_temp_dir(const std::string& tag) {
  static std::atomic<std::uint64_t> counter{0};
  const auto base = std::filesystem::temp_directory_path() / "agridet-tests";
  const auto dir =
      base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

ImageBuffer make_test_image(int width, int height, int channels, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(width, height, channels);
  // Gradient base so augmentations have structure to act on.
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < channels; ++c) {
        const double gx = static_cast<double>(j) / std::max(1, width - 1);
        const double gy = static_cast<double>(i) / std::max(1, height - 1);
        img.at(i, j, c) = 0.15 + 0.6 * (0.5 * gx + 0.5 * gy) + 0.05 * c;
      }
    }
  }
  // A few solid blocks at seeded positions.
  for (int b = 0; b < 3; ++b) {
    const int bw = 4 + rng.uniform_int(0, width / 4);
    const int bh = 4 + rng.uniform_int(0, height / 4);
    const int x0 = rng.uniform_int(0, std::max(0, width - bw - 1));
    const int y0 = rng.uniform_int(0, std::max(0, height - bh - 1));
    const double value = rng.uniform(0.05, 0.95);
    for (int i = y0; i < y0 + bh; ++i) {
      for (int j = x0; j < x0 + bw; ++j) {
        for (int c = 0; c < channels; ++c) img.at(i, j, c) = value;
      }
    }
  }
  return img;
}

DatasetManifest make_fixture_dataset(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ClassMap classes;

  struct Spec {
    const char* name;
    int width;
    int height;
    std::vector<LabeledBox> objects;
  };
  const Spec specs[] = {
      {"field_a", 64, 48,
       {{{4, 6, 28, 30}, kClassHealthy, std::nullopt},
        {{30, 10, 60, 40}, kClassStressed, std::nullopt}}},
      {"field_b", 64, 48, {{{10, 8, 40, 36}, kClassHealthy, std::nullopt}}},
  };

  DatasetManifest manifest;
  manifest.split = "train";
  manifest.classes = classes;
  std::uint64_t seed = 41;
  for (const Spec& spec : specs) {
    const ImageBuffer img = make_test_image(spec.width, spec.height, 3, seed++);
    const auto image_path = dir / (std::string(spec.name) + ".ppm");
    const auto ann_path = dir / (std::string(spec.name) + ".xml");
    write_pnm_file(image_path, img);
    Annotation ann;
    ann.filename = image_path.filename().string();
    ann.width = spec.width;
    ann.height = spec.height;
    ann.depth = 3;
    ann.objects = spec.objects;
    write_annotation_file(ann_path, ann, classes);
    manifest.entries.push_back({image_path, ann_path});
  }
  save_manifest(manifest, dir / "manifest.txt");
  return manifest;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("fixture: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace testsupport
