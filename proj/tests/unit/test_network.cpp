// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/network.hpp"

#include <cmath>
#include <vector>

#include <doctest.h>

#include "agridet/errors.hpp"
#include "agridet/random.hpp"
#include "fixtures.hpp"

using namespace agridet;

namespace {

Tensor random_image(int size, std::uint64_t seed, int channels = 3) {
  Rng rng(seed);
  Tensor t(size, size, channels);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

ModelConfig small_config(int size = 64, int depth = 1) {
  ModelConfig cfg;
  cfg.anchors.input_size = {size, size};
  cfg.heads.depth = depth;
  // Slimmer stages keep the unit suite quick; shapes are what matters here.
  cfg.plan = {3, 8, 16, 24, 32, 48};
  cfg.heads.channels = 32;
  return cfg;
}

}  // namespace

TEST_CASE("backbone stage shapes and stride arithmetic") {
  const ChannelPlan plan;
  const StubBackbone backbone(plan, 5);
  const BackboneFeatures f = backbone.forward(random_image(64, 1));
  CHECK(f.c2.height() == 16);
  CHECK(f.c3.height() == 8);
  CHECK(f.c4.height() == 4);
  CHECK(f.c5.height() == 2);
  CHECK(f.c2.channels() == plan.c2);
  CHECK(f.c5.channels() == plan.c5);

  CHECK_THROWS_AS(backbone.forward(random_image(60, 1)), InvalidInputError);
  CHECK_THROWS_AS(backbone.forward(random_image(64, 1, 4)), ShapeError);
}

TEST_CASE("backbone is deterministic per seed") {
  const ChannelPlan plan{3, 8, 12, 16, 20, 24};
  const Tensor image = random_image(64, 9);
  const BackboneFeatures a = StubBackbone(plan, 42).forward(image);
  const BackboneFeatures b = StubBackbone(plan, 42).forward(image);
  REQUIRE(a.c5.size() == b.c5.size());
  for (std::size_t i = 0; i < a.c5.values().size(); ++i) {
    CHECK(a.c5.values()[i] == b.c5.values()[i]);
  }
  const BackboneFeatures c = StubBackbone(plan, 43).forward(image);
  bool differs = false;
  for (std::size_t i = 0; i < a.c5.values().size(); ++i) {
    differs |= a.c5.values()[i] != c.c5.values()[i];
  }
  CHECK(differs);
}

TEST_CASE("pyramid shapes for a 64 input") {
  const ChannelPlan plan{3, 8, 12, 16, 20, 24};
  const BackboneFeatures f = StubBackbone(plan, 3).forward(random_image(64, 4));
  ForwardTrace trace;
  const PyramidFeatures p = FeaturePyramid(plan, 7, 48).forward(f, &trace);

  const int expected[] = {16, 8, 4, 2, 1};
  const Tensor* levels[] = {&p.p2, &p.p3, &p.p4, &p.p5, &p.p6};
  for (int l = 0; l < 5; ++l) {
    CHECK(levels[l]->height() == expected[l]);
    CHECK(levels[l]->width() == expected[l]);
    CHECK(levels[l]->channels() == 48);
  }
  // The stride-4 merge happened at the C2 resolution.
  const auto* merge = trace.find("P2 merged");
  REQUIRE(merge != nullptr);
  CHECK(merge->height == 16);
  CHECK(merge->channels == 48);
}

TEST_CASE("pyramid zero features with zero biases give zero outputs") {
  const ChannelPlan plan{3, 8, 12, 16, 20, 24};
  FeaturePyramid pyramid(plan, 11, 32);
  pyramid.visit_params([](const std::string&, ConvSpec& spec) {
    std::fill(spec.bias.begin(), spec.bias.end(), 0.0);
  });
  BackboneFeatures zeros;
  zeros.c2 = Tensor(16, 16, plan.c2);
  zeros.c3 = Tensor(8, 8, plan.c3);
  zeros.c4 = Tensor(4, 4, plan.c4);
  zeros.c5 = Tensor(2, 2, plan.c5);
  const PyramidFeatures p = pyramid.forward(zeros);
  for (const Tensor* t : {&p.p2, &p.p3, &p.p4, &p.p5, &p.p6}) {
    for (double v : t->values()) CHECK(v == 0.0);
  }
}

TEST_CASE("pyramid rejects inconsistent backbone strides and lateral faults") {
  const ChannelPlan plan{3, 8, 12, 16, 20, 24};
  FeaturePyramid pyramid(plan, 13, 32);
  BackboneFeatures bad;
  bad.c2 = Tensor(16, 16, plan.c2);
  bad.c3 = Tensor(8, 8, plan.c3);
  bad.c4 = Tensor(5, 5, plan.c4);  // should be 4
  bad.c5 = Tensor(2, 2, plan.c5);
  CHECK_THROWS_AS(pyramid.forward(bad), ShapeError);

  BackboneFeatures good;
  good.c2 = Tensor(16, 16, plan.c2);
  good.c3 = Tensor(8, 8, plan.c3);
  good.c4 = Tensor(4, 4, plan.c4);
  good.c5 = Tensor(2, 2, plan.c5);
  pyramid.inject_lateral_channel_fault(4);
  CHECK_THROWS_WITH_AS(pyramid.forward(good), doctest::Contains("P4 merge"), ShapeError);
}

TEST_CASE("odd levels upsample with a one-row overhang and crop") {
  // 96 input: C5 = 3, so P6 = 2 and upsample(P6) = 4 crops against 3.
  const ChannelPlan plan{3, 8, 12, 16, 20, 24};
  const BackboneFeatures f = StubBackbone(plan, 21).forward(random_image(96, 22));
  CHECK(f.c5.height() == 3);
  const PyramidFeatures p = FeaturePyramid(plan, 23, 16).forward(f);
  CHECK(p.p6.height() == 2);
  CHECK(p.p5.height() == 3);
  CHECK(p.p2.height() == 24);
}

TEST_CASE("heads emit per-level maps matching the anchor layout") {
  const HeadConfig cfg{3, 2, 1, 32};
  PyramidFeatures p;
  p.p2 = Tensor(16, 16, 32);
  p.p3 = Tensor(8, 8, 32);
  p.p4 = Tensor(4, 4, 32);
  p.p5 = Tensor(2, 2, 32);
  p.p6 = Tensor(1, 1, 32);
  ForwardTrace trace;
  const RawDetections raw = DetectionHeads(cfg, 17).forward(p, &trace);
  CHECK(raw.count() == 3 * (256 + 64 + 16 + 4 + 1));
  CHECK(raw.logits.size() == raw.count() * 2);

  const auto* cls4 = trace.find("P4 cls");
  REQUIRE(cls4 != nullptr);
  CHECK(cls4->channels == 6);   // A*K
  const auto* box4 = trace.find("P4 box");
  REQUIRE(box4 != nullptr);
  CHECK(box4->channels == 12);  // A*4

  // depth 0 collapses the towers to the output convolutions alone.
  const RawDetections shallow = DetectionHeads({3, 2, 0, 32}, 17).forward(p);
  CHECK(shallow.count() == raw.count());

  PyramidFeatures wrong = p;
  wrong.p3 = Tensor(8, 8, 16);
  CHECK_THROWS_AS(DetectionHeads(cfg, 17).forward(wrong), ShapeError);
}

TEST_CASE("head flattening follows level/cell/anchor order") {
  // Zero weights turn each output conv into its bias pattern, exposing the
  // channel-to-anchor-slot mapping directly.
  HeadConfig cfg{3, 2, 0, 8};
  DetectionHeads heads(cfg, 1);
  heads.visit_params([](const std::string& name, ConvSpec& spec) {
    std::fill(spec.weights.begin(), spec.weights.end(), 0.0);
    for (std::size_t i = 0; i < spec.bias.size(); ++i) {
      spec.bias[i] = (name == "heads.cls.out" ? 100.0 : 0.5) + static_cast<double>(i);
    }
  });
  PyramidFeatures p;
  p.p2 = Tensor(2, 3, 8);
  p.p3 = Tensor(1, 2, 8);
  p.p4 = Tensor(1, 1, 8);
  p.p5 = Tensor(1, 1, 8);
  p.p6 = Tensor(1, 1, 8);
  const RawDetections raw = heads.forward(p);
  REQUIRE(raw.count() == 3u * (6 + 2 + 1 + 1 + 1));

  std::size_t anchor = 0;
  for (int cells : {6, 2, 1, 1, 1}) {
    for (int cell = 0; cell < cells; ++cell) {
      for (int a = 0; a < 3; ++a, ++anchor) {
        CHECK(raw.logits[anchor * 2 + 0] == 100.0 + a * 2 + 0);
        CHECK(raw.logits[anchor * 2 + 1] == 100.0 + a * 2 + 1);
        CHECK(raw.deltas[anchor].tx == 0.5 + a * 4 + 0);
        CHECK(raw.deltas[anchor].ty == 0.5 + a * 4 + 1);
        CHECK(raw.deltas[anchor].tw == 0.5 + a * 4 + 2);
        CHECK(raw.deltas[anchor].th == 0.5 + a * 4 + 3);
      }
    }
  }
}

TEST_CASE("raw detections align with generate_anchors count") {
  const ModelConfig cfg = small_config();
  const DetectorModel model(cfg, 31);
  const RawDetections raw = model.raw_forward(random_image(64, 32));
  CHECK(raw.count() == anchor_count(generate_anchors(cfg.anchors)));
  CHECK(raw.count() == 1023);
}

TEST_CASE("detect returns in-bounds scored boxes or nothing") {
  const ModelConfig cfg = small_config();
  const DetectorModel model(cfg, 77);
  const auto detections = model.detect(random_image(64, 78));
  for (const LabeledBox& det : detections) {
    REQUIRE(det.score.has_value());
    CHECK(*det.score > cfg.score_threshold);
    CHECK(det.box.xmin >= 0.0);
    CHECK(det.box.ymin >= 0.0);
    CHECK(det.box.xmax <= 64.0);
    CHECK(det.box.ymax <= 64.0);
    CHECK((det.class_id == 0 || det.class_id == 1));
  }

  ModelConfig impossible = cfg;
  impossible.score_threshold = 1.01;
  const DetectorModel strict(impossible, 77);
  CHECK(strict.detect(random_image(64, 78)).empty());

  CHECK_THROWS_AS(model.detect(random_image(32, 5)), InvalidInputError);
}

TEST_CASE("injected logits drive exactly one detection through postprocessing") {
  const ModelConfig cfg = small_config();
  const auto anchors = flatten_anchors(generate_anchors(cfg.anchors));

  RawDetections raw;
  raw.num_classes = 2;
  raw.logits.assign(anchors.size() * 2, -20.0);
  raw.deltas.assign(anchors.size(), RegressionDeltas{});

  const std::size_t chosen = 123;
  const Box target{10, 12, 30, 40};
  raw.deltas[chosen] = encode_box(anchors[chosen], target);
  raw.logits[chosen * 2 + kClassStressed] = std::log(0.99 / 0.01);  // sigmoid -> 0.99

  const auto detections = postprocess_detections(raw, anchors, cfg);
  REQUIRE(detections.size() == 1);
  CHECK(detections[0].class_id == kClassStressed);
  CHECK(*detections[0].score == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(detections[0].box.xmin == doctest::Approx(target.xmin).epsilon(1e-9));
  CHECK(detections[0].box.ymin == doctest::Approx(target.ymin).epsilon(1e-9));
  CHECK(detections[0].box.xmax == doctest::Approx(target.xmax).epsilon(1e-9));
  CHECK(detections[0].box.ymax == doctest::Approx(target.ymax).epsilon(1e-9));
}

TEST_CASE("weight export/import round trips through float32") {
  const ModelConfig cfg = small_config();
  DetectorModel source(cfg, 101);
  DetectorModel other(cfg, 202);

  const auto dir = testsupport::unique_temp_dir("weights");
  source.save_weights(dir / "w.bin", dir / "w.manifest");
  other.load_weights(dir / "w.bin", dir / "w.manifest");

  // After loading, a re-export is byte-identical: float32 is the wire
  // precision.
  other.save_weights(dir / "w2.bin", dir / "w2.manifest");
  CHECK(testsupport::read_file_bytes(dir / "w.bin") ==
        testsupport::read_file_bytes(dir / "w2.bin"));
  CHECK(testsupport::read_file_bytes(dir / "w.manifest") ==
        testsupport::read_file_bytes(dir / "w2.manifest"));

  // Loaded models run the same forward graph.
  const Tensor image = random_image(64, 303);
  const RawDetections a = source.raw_forward(image);
  const RawDetections b = other.raw_forward(image);
  REQUIRE(a.logits.size() == b.logits.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.logits.size(); ++i) {
    worst = std::max(worst, std::abs(a.logits[i] - b.logits[i]));
  }
  CHECK(worst < 1e-4);  // float32 quantization only

  // Dimension mismatches are detected.
  DetectorModel bigger(small_config(64, 2), 7);
  CHECK_THROWS_AS(bigger.load_weights(dir / "w.bin", dir / "w.manifest"), ParseError);
}

TEST_CASE("free-function graph stages compose") {
  const ChannelPlan plan{3, 8, 12, 16, 20, 24};
  const BackboneFeatures f = backbone_stub(random_image(64, 51), plan, 52);
  const PyramidFeatures p = build_pyramid(f, 53, 24);
  CHECK(p.p2.channels() == 24);
  const RawDetections raw = run_heads(p, {3, 2, 0, 24}, 54);
  CHECK(raw.count() == 1023);
}
