// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "agridet/errors.hpp"
#include "agridet/random.hpp"

using namespace agridet;

namespace {

Box random_box(Rng& rng, double extent) {
  const double x0 = rng.uniform(0.0, extent - 2.0);
  const double y0 = rng.uniform(0.0, extent - 2.0);
  return {x0, y0, x0 + rng.uniform(1.0, extent - x0), y0 + rng.uniform(1.0, extent - y0)};
}

// Counting approximation of IoU on a fine sample grid, independent of the
// closed-form path.
double iou_pixel_counting_oracle(const Box& a, const Box& b, double step) {
  const double lo_x = std::min(a.xmin, b.xmin) - 1.0;
  const double hi_x = std::max(a.xmax, b.xmax) + 1.0;
  const double lo_y = std::min(a.ymin, b.ymin) - 1.0;
  const double hi_y = std::max(a.ymax, b.ymax) + 1.0;
  auto inside = [](const Box& box, double x, double y) {
    return x >= box.xmin && x < box.xmax && y >= box.ymin && y < box.ymax;
  };
  std::size_t inter = 0, uni = 0;
  for (double y = lo_y + step / 2; y < hi_y; y += step) {
    for (double x = lo_x + step / 2; x < hi_x; x += step) {
      const bool in_a = inside(a, x, y);
      const bool in_b = inside(b, x, y);
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Reference NMS: independent quadratic implementation with its own IoU.
std::vector<std::size_t> nms_oracle(const std::vector<LabeledBox>& dets, double thresh,
                                    bool per_class) {
  auto iou = [](const Box& a, const Box& b) {
    const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double area_a = (a.xmax - a.xmin) * (a.ymax - a.ymin);
    const double area_b = (b.xmax - b.xmin) * (b.ymax - b.ymin);
    return inter / (area_a + area_b - inter);
  };
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *dets[a].score > *dets[b].score;
  });
  std::vector<std::size_t> kept;
  for (std::size_t candidate : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (per_class && dets[k].class_id != dets[candidate].class_id) continue;
      if (iou(dets[k].box, dets[candidate].box) > thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

// Reference target assignment by exhaustive max-IoU recomputation.
AnchorAssignment assign_oracle(const std::vector<Box>& anchors,
                               const std::vector<LabeledBox>& gt, double pos, double neg) {
  AnchorAssignment out;
  out.labels.assign(anchors.size(), AnchorLabel::negative);
  out.matched_gt.assign(anchors.size(), -1);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    std::int64_t best_g = -1;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double iou = box_iou(anchors[a], gt[g].box);
      if (iou > best) {
        best = iou;
        best_g = static_cast<std::int64_t>(g);
      }
    }
    if (best_g >= 0 && best >= pos) {
      out.labels[a] = AnchorLabel::positive;
      out.matched_gt[a] = best_g;
    } else if (best >= neg) {
      out.labels[a] = AnchorLabel::ignore;
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    double best = 0.0;
    std::int64_t best_a = -1;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double iou = box_iou(anchors[a], gt[g].box);
      if (iou > best) {
        best = iou;
        best_a = static_cast<std::int64_t>(a);
      }
    }
    if (best_a >= 0 && best > 0.0 && best < pos) {
      out.labels[static_cast<std::size_t>(best_a)] = AnchorLabel::positive;
      out.matched_gt[static_cast<std::size_t>(best_a)] = static_cast<std::int64_t>(g);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("box_iou identities and hand values") {
  const Box a{0, 0, 10, 10};
  CHECK(box_iou(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(box_iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);

  const Box b{5, 5, 15, 15};
  const double expected = 25.0 / 175.0;
  CHECK(box_iou(a, b) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(iou_pixel_counting_oracle(a, b, 0.05) - box_iou(a, b)) < 5e-3);
}

TEST_CASE("box_iou properties over random boxes") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const Box a = random_box(rng, 100.0);
    const Box b = random_box(rng, 100.0);
    const double iou = box_iou(a, b);
    CHECK(iou == box_iou(b, a));
    CHECK(iou >= 0.0);
    CHECK(iou <= 1.0);
  }
  CHECK(box_iou({2, 3, 4, 9}, {2, 3, 4, 9}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("box_iou rejects degenerate boxes") {
  CHECK_THROWS_AS(box_iou({0, 0, 0, 1}, {0, 0, 1, 1}), InvalidInputError);
  CHECK_THROWS_AS(box_iou({0, 0, 1, 1}, {3, 4, 3, 9}), InvalidInputError);
}

TEST_CASE("generate_anchors default grid for 672") {
  AnchorConfig cfg;
  const auto levels = generate_anchors(cfg);
  REQUIRE(levels.size() == 5);

  // Independent count: walk each grid cell-by-cell.
  std::size_t oracle_total = 0;
  const std::size_t expected_per_level[] = {84672, 21168, 5292, 1323, 363};
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const int stride = cfg.level_strides[l];
    std::size_t rows = 0, cols = 0;
    while (static_cast<int>(rows) * stride < cfg.input_size.height) ++rows;
    while (static_cast<int>(cols) * stride < cfg.input_size.width) ++cols;
    const std::size_t count = rows * cols * cfg.ratios.size();
    oracle_total += count;
    CHECK(levels[l].size() == count);
    CHECK(levels[l].size() == expected_per_level[l]);
  }
  CHECK(anchor_count(levels) == oracle_total);
  CHECK(anchor_count(levels) == 112818);
}

TEST_CASE("generate_anchors cell geometry") {
  AnchorConfig cfg;
  const auto levels = generate_anchors(cfg);

  // Level P2, cell (0,0), ratio 1 (second ratio entry): center (2,2).
  const Box& square = levels[0][1];
  CHECK(square.xmin == doctest::Approx(-6.0).epsilon(1e-12));
  CHECK(square.ymin == doctest::Approx(-6.0).epsilon(1e-12));
  CHECK(square.xmax == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(square.ymax == doctest::Approx(10.0).epsilon(1e-12));

  // Ratio 0.5 at size 16: width 16/sqrt(2), height 16*sqrt(2), area 256.
  const Box& wide = levels[0][0];
  CHECK(wide.width() == doctest::Approx(16.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(wide.height() == doctest::Approx(16.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(wide.area() == doctest::Approx(256.0).epsilon(1e-12));

  // Every anchor preserves area size^2 (sampled).
  Rng rng(11);
  for (int l = 0; l < 5; ++l) {
    for (int s = 0; s < 50; ++s) {
      const auto idx = static_cast<std::size_t>(rng.next_u64() % levels[l].size());
      CHECK(levels[l][idx].area() ==
            doctest::Approx(cfg.level_sizes[l] * cfg.level_sizes[l]).epsilon(1e-9));
    }
  }
}

TEST_CASE("generate_anchors 64 input and config validation") {
  AnchorConfig cfg;
  cfg.input_size = {64, 64};
  CHECK(anchor_count(generate_anchors(cfg)) == 1023);

  AnchorConfig bad = cfg;
  bad.input_size = {100, 64};
  CHECK_THROWS_AS(generate_anchors(bad), ConfigError);

  bad = cfg;
  bad.level_strides = {4, 8, 16, 32};  // one size too many
  CHECK_THROWS_AS(generate_anchors(bad), ConfigError);

  bad = cfg;
  bad.level_strides = {4, 8, 12, 32, 64};  // 12 not a power of two
  CHECK_THROWS_AS(generate_anchors(bad), ConfigError);

  bad = cfg;
  bad.ratios = {0.5, -1.0, 2.0};
  CHECK_THROWS_AS(generate_anchors(bad), ConfigError);
}

TEST_CASE("encode_box hand cases") {
  const Box anchor{0, 0, 100, 100};
  const RegressionDeltas zero = encode_box(anchor, anchor);
  CHECK(zero.tx == 0.0);
  CHECK(zero.ty == 0.0);
  CHECK(zero.tw == 0.0);
  CHECK(zero.th == 0.0);

  // anchor center (50,50), 100x100; gt center (60,50), 200x100.
  const Box gt{-40, 0, 160, 100};
  const RegressionDeltas d = encode_box(anchor, gt);
  CHECK(d.tx == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d.ty == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.tw == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(d.th == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("decode_box identity, clipping, and saturation") {
  const Box anchor{-6, -6, 10, 10};
  const auto clipped = decode_box(anchor, {}, ImageSize{672, 672});
  REQUIRE(clipped.has_value());
  CHECK(clipped->xmin == 0.0);
  CHECK(clipped->ymin == 0.0);
  CHECK(clipped->xmax == 10.0);
  CHECK(clipped->ymax == 10.0);

  bool saturated = false;
  const auto huge = decode_box(anchor, {0, 0, 1000.0, 0}, ImageSize{672, 672}, &saturated);
  CHECK(saturated);
  REQUIRE(huge.has_value());
  CHECK(huge->xmin >= 0.0);
  CHECK(huge->xmax <= 672.0);

  // A box that clips away entirely.
  const Box far_anchor{-30, -30, -10, -10};
  CHECK_FALSE(decode_box(far_anchor, {}, ImageSize{672, 672}).has_value());
}

TEST_CASE("encode/decode round trip") {
  Rng rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    const Box anchor = random_box(rng, 600.0);
    const Box gt = random_box(rng, 600.0);
    const Box back = decode_box(anchor, encode_box(anchor, gt));
    CHECK(std::abs(back.xmin - gt.xmin) <= 1e-9);
    CHECK(std::abs(back.ymin - gt.ymin) <= 1e-9);
    CHECK(std::abs(back.xmax - gt.xmax) <= 1e-9);
    CHECK(std::abs(back.ymax - gt.ymax) <= 1e-9);
  }
}

TEST_CASE("nms basics") {
  const LabeledBox only{{0, 0, 10, 10}, kClassHealthy, 0.5};
  CHECK(nms(std::vector<LabeledBox>{only}).size() == 1);

  // Two identical boxes: the higher score survives.
  std::vector<LabeledBox> pair{{{0, 0, 10, 10}, kClassHealthy, 0.8},
                               {{0, 0, 10, 10}, kClassHealthy, 0.9}};
  const auto kept = nms(pair);
  REQUIRE(kept.size() == 1);
  CHECK(*kept[0].score == 0.9);

  // Same geometry, different classes: per-class NMS keeps both.
  std::vector<LabeledBox> mixed{{{0, 0, 10, 10}, kClassHealthy, 0.8},
                                {{0, 0, 10, 10}, kClassStressed, 0.9}};
  CHECK(nms(mixed).size() == 2);
  CHECK(nms(mixed, 0.3, NmsMode::class_agnostic).size() == 1);

  // Equal scores: ascending insertion index wins.
  std::vector<LabeledBox> tied{{{0, 0, 10, 10}, kClassHealthy, 0.7},
                               {{1, 1, 11, 11}, kClassHealthy, 0.7}};
  const auto tie_kept = nms_indices(tied, 0.3);
  REQUIRE(tie_kept.size() == 1);
  CHECK(tie_kept[0] == 0);

  CHECK(nms(std::vector<LabeledBox>{}).empty());
  CHECK_THROWS_AS(nms(std::vector<LabeledBox>{{{0, 0, 1, 1}, 0, std::nullopt}}),
                  InvalidInputError);
}

TEST_CASE("nms matches the quadratic oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<LabeledBox> dets;
    for (int i = 0; i < 1000; ++i) {
      Box b = random_box(rng, 200.0);
      dets.push_back({b, rng.uniform() < 0.5 ? kClassHealthy : kClassStressed, rng.uniform()});
    }
    CHECK(nms_indices(dets, 0.3) == nms_oracle(dets, 0.3, true));
    CHECK(nms_indices(dets, 0.3, NmsMode::class_agnostic) == nms_oracle(dets, 0.3, false));
  }
}

TEST_CASE("nms output is score-sorted and non-overlapping") {
  Rng rng(99);
  std::vector<LabeledBox> dets;
  for (int i = 0; i < 300; ++i) {
    dets.push_back({random_box(rng, 100.0), kClassHealthy, rng.uniform()});
  }
  const auto kept = nms(dets, 0.3);
  for (std::size_t i = 1; i < kept.size(); ++i) CHECK(*kept[i - 1].score >= *kept[i].score);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      CHECK(box_iou(kept[i].box, kept[j].box) <= 0.3);
    }
  }
}

TEST_CASE("assign_targets basics") {
  const std::vector<Box> anchors{{0, 0, 10, 10}, {50, 50, 60, 60}};
  const std::vector<LabeledBox> gt{{{0, 0, 10, 10}, kClassHealthy, std::nullopt}};
  const AnchorAssignment assignment = assign_targets(anchors, gt);
  CHECK(assignment.labels[0] == AnchorLabel::positive);
  CHECK(assignment.matched_gt[0] == 0);
  CHECK(assignment.labels[1] == AnchorLabel::negative);
  CHECK(assignment.positive_count() == 1);

  const AnchorAssignment empty_gt = assign_targets(anchors, std::vector<LabeledBox>{});
  CHECK(empty_gt.labels[0] == AnchorLabel::negative);
  CHECK(empty_gt.labels[1] == AnchorLabel::negative);

  CHECK_THROWS_AS(assign_targets(anchors, gt, 0.4, 0.5), InvalidInputError);
}

TEST_CASE("assign_targets forces a best anchor per uncovered ground truth") {
  // The single gt overlaps the anchor at IoU well under pos_thresh.
  const std::vector<Box> anchors{{0, 0, 10, 10}, {40, 40, 50, 50}};
  const std::vector<LabeledBox> gt{{{6, 6, 16, 16}, kClassStressed, std::nullopt}};
  const AnchorAssignment assignment = assign_targets(anchors, gt);
  CHECK(assignment.labels[0] == AnchorLabel::positive);
  CHECK(assignment.matched_gt[0] == 0);
}

TEST_CASE("assign_targets matches the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed * 31 + 5);
    std::vector<Box> anchors;
    for (int i = 0; i < 50; ++i) anchors.push_back(random_box(rng, 120.0));
    std::vector<LabeledBox> gt;
    for (int i = 0; i < 5; ++i) {
      gt.push_back({random_box(rng, 120.0), i % 2, std::nullopt});
    }
    const AnchorAssignment got = assign_targets(anchors, gt);
    const AnchorAssignment want = assign_oracle(anchors, gt, 0.5, 0.4);
    CHECK(got.labels == want.labels);
    CHECK(got.matched_gt == want.matched_gt);

    // No anchor is simultaneously positive and negative by construction;
    // verify positives always carry a match.
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (got.labels[a] == AnchorLabel::positive) CHECK(got.matched_gt[a] >= 0);
      if (got.labels[a] != AnchorLabel::positive) CHECK(got.matched_gt[a] == -1);
    }
  }
}
