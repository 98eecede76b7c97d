// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace agridet {

/// Axis-aligned rectangle in continuous pixel coordinates. Origin is the
/// top-left image corner; x grows rightward, y grows downward.
struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool valid() const { return xmax > xmin && ymax > ymin; }
};

inline constexpr int kClassHealthy = 0;
inline constexpr int kClassStressed = 1;

struct LabeledBox {
  Box box;
  int class_id = kClassHealthy;
  std::optional<double> score;  // confidence in [0,1] when present
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Anchor pyramid layout. One anchor size per level, shared ratio set.
/// Ratio means width/height; for size z and ratio r the anchor measures
/// z*sqrt(r) by z/sqrt(r), preserving area z^2.
struct AnchorConfig {
  std::vector<int> level_strides = {4, 8, 16, 32, 64};
  std::vector<double> level_sizes = {16, 32, 64, 128, 256};
  std::vector<double> ratios = {0.5, 1.0, 2.0};
  ImageSize input_size = {672, 672};

  int anchors_per_cell() const { return static_cast<int>(ratios.size()); }
  int num_levels() const { return static_cast<int>(level_strides.size()); }

  /// Throws ConfigError if any invariant is violated (sizes/strides count
  /// mismatch, non-power-of-two or non-increasing strides, nonpositive
  /// ratios, input dimensions not multiples of 32).
  void validate() const;
};

/// Center/size offsets of a box relative to an anchor: tx, ty are center
/// shifts in anchor-size units, tw, th are log size ratios.
struct RegressionDeltas {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
};

enum class AnchorLabel : std::uint8_t { negative = 0, positive = 1, ignore = 2 };

struct AnchorAssignment {
  std::vector<AnchorLabel> labels;
  std::vector<std::int64_t> matched_gt;  // ground-truth index for positives, -1 otherwise

  std::size_t positive_count() const;
};

/// Continuous-area intersection over union. Throws InvalidInputError if
/// either box is degenerate.
double box_iou(const Box& a, const Box& b);

/// Anchors for every pyramid level. Level l with stride s tiles a
/// ceil(H/s) x ceil(W/s) grid; the anchor at (row, col) is centered at
/// ((col+0.5)*s, (row+0.5)*s). Order within a level is row-major with the
/// ratio index innermost. Anchors may extend beyond the image bounds.
std::vector<std::vector<Box>> generate_anchors(const AnchorConfig& cfg);

std::size_t anchor_count(const std::vector<std::vector<Box>>& levels);

/// Level-major concatenation, matching the raw-detection flattening order.
std::vector<Box> flatten_anchors(const std::vector<std::vector<Box>>& levels);

RegressionDeltas encode_box(const Box& anchor, const Box& gt);

/// Inverse of encode_box, unclipped. Exponents are clamped before exp();
/// when clamping fires, *saturated is set if provided.
Box decode_box(const Box& anchor, const RegressionDeltas& d, bool* saturated = nullptr);

/// Decode and clip to image bounds. Returns nullopt when the decoded box
/// falls entirely outside the image (clipping would collapse it).
std::optional<Box> decode_box(const Box& anchor, const RegressionDeltas& d,
                              const ImageSize& bounds, bool* saturated = nullptr);

enum class NmsMode { per_class, class_agnostic };

/// Greedy non-maximum suppression. Candidates are visited in descending
/// score order (ties broken by ascending input index); a candidate is
/// suppressed iff its IoU with an already kept box exceeds iou_thresh.
/// In per_class mode only boxes of the same class suppress each other.
/// Returns the kept input indices in selection (score-sorted) order.
std::vector<std::size_t> nms_indices(std::span<const LabeledBox> dets, double iou_thresh = 0.3,
                                     NmsMode mode = NmsMode::per_class);

/// Convenience wrapper returning the kept boxes themselves.
std::vector<LabeledBox> nms(std::span<const LabeledBox> dets, double iou_thresh = 0.3,
                            NmsMode mode = NmsMode::per_class);

/// Per-anchor training labels. An anchor is positive when its best IoU over
/// ground truth reaches pos_thresh (matched to the argmax box), negative
/// below neg_thresh, ignored in between. A ground-truth box that no anchor
/// reaches at pos_thresh is force-matched to its highest-IoU anchor,
/// provided that IoU is nonzero; ties take the lowest index. Empty ground
/// truth labels every anchor negative.
AnchorAssignment assign_targets(std::span<const Box> anchors, std::span<const LabeledBox> gt,
                                double pos_thresh = 0.5, double neg_thresh = 0.4);

}  // namespace agridet
