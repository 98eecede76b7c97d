// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "agridet/augment.hpp"
#include "agridet/geometry.hpp"
#include "agridet/losses.hpp"
#include "agridet/metrics.hpp"
#include "agridet/random.hpp"
#include "agridet/tensor.hpp"

using namespace agridet;

namespace {

Tensor random_tensor(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(h, w, c);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void Conv3x3(benchmark::State& state) {
  const int channels = static_cast<int>(state.range(0));
  Rng rng(1);
  const Tensor x = random_tensor(64, 64, channels, 2);
  const ConvSpec spec = ConvSpec::random_init(3, 1, channels, channels, rng);
  for (auto _ : state) {
    Tensor y = conv2d(x, spec);
    benchmark::DoNotOptimize(y.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 64 * 64 * 9 * channels * channels);
}
BENCHMARK(Conv3x3)->Arg(16)->Arg(64)->Arg(128);

void GenerateAnchors672(benchmark::State& state) {
  AnchorConfig cfg;
  for (auto _ : state) {
    auto levels = generate_anchors(cfg);
    benchmark::DoNotOptimize(levels.data());
  }
}
BENCHMARK(GenerateAnchors672);

void Nms(benchmark::State& state) {
  Rng rng(7);
  std::vector<LabeledBox> dets;
  for (int i = 0; i < state.range(0); ++i) {
    const double x0 = rng.uniform(0, 500);
    const double y0 = rng.uniform(0, 500);
    dets.push_back({{x0, y0, x0 + rng.uniform(5, 60), y0 + rng.uniform(5, 60)},
                    rng.uniform() < 0.5 ? 0 : 1, rng.uniform()});
  }
  for (auto _ : state) {
    auto kept = nms_indices(dets, 0.3);
    benchmark::DoNotOptimize(kept.data());
  }
}
BENCHMARK(Nms)->Arg(1000)->Arg(5000);

void PixelConfusion(benchmark::State& state) {
  Rng rng(3);
  std::vector<LabeledBox> gt, pred;
  for (int i = 0; i < 8; ++i) {
    const double x0 = rng.uniform(0, 600);
    const double y0 = rng.uniform(0, 600);
    gt.push_back({{x0, y0, x0 + 40, y0 + 40}, i % 2, std::nullopt});
    pred.push_back({{x0 + 8, y0 + 8, x0 + 52, y0 + 52}, i % 2, std::nullopt});
  }
  const PixelGrid grid{672, 672};
  for (auto _ : state) {
    auto counts = pixel_confusion(gt, pred, grid);
    benchmark::DoNotOptimize(counts.data());
  }
}
BENCHMARK(PixelConfusion);

void GammaAdjust(benchmark::State& state) {
  Rng rng(5);
  ImageBuffer img(672, 672, 3);
  for (double& v : img.values()) v = rng.uniform();
  for (auto _ : state) {
    ImageBuffer out = adjust_gamma(img, 0.8, 0.8);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(GammaAdjust);

void FocalLossBatch(benchmark::State& state) {
  Rng rng(11);
  LossConfig cfg;
  std::vector<double> logits(4096);
  for (double& l : logits) l = rng.uniform(-6, 6);
  for (auto _ : state) {
    double total = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      total += focal_loss(logits[i], i % 2 == 0 ? 1 : 0, cfg).value;
    }
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(logits.size()));
}
BENCHMARK(FocalLossBatch);

}  // namespace

BENCHMARK_MAIN();
