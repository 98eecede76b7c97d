// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agridet/errors.hpp"

namespace agridet {

namespace {

void require_valid(const Box& b, const char* who) {
  if (!b.valid()) {
    std::ostringstream msg;
    msg << who << ": degenerate box (" << b.xmin << "," << b.ymin << "," << b.xmax << ","
        << b.ymax << ")";
    throw InvalidInputError(msg.str());
  }
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int grid_cells(int extent, int stride) { return (extent + stride - 1) / stride; }

// Exponent clamp for decode_box; exp(60) ~ 1.1e26, far outside any image
// but still finite in double.
constexpr double kMaxLogScale = 60.0;

}  // namespace

void AnchorConfig::validate() const {
  if (level_strides.empty() || level_strides.size() != level_sizes.size()) {
    throw ConfigError("anchor config: need exactly one size per level");
  }
  for (std::size_t i = 0; i < level_strides.size(); ++i) {
    if (!is_power_of_two(level_strides[i])) {
      throw ConfigError("anchor config: strides must be powers of two");
    }
    if (i > 0 && level_strides[i] <= level_strides[i - 1]) {
      throw ConfigError("anchor config: strides must be strictly increasing");
    }
    if (!(level_sizes[i] > 0)) {
      throw ConfigError("anchor config: anchor sizes must be positive");
    }
  }
  if (ratios.empty()) {
    throw ConfigError("anchor config: at least one ratio required");
  }
  for (double r : ratios) {
    if (!(r > 0)) throw ConfigError("anchor config: ratios must be positive");
  }
  if (input_size.width <= 0 || input_size.height <= 0 || input_size.width % 32 != 0 ||
      input_size.height % 32 != 0) {
    std::ostringstream msg;
    msg << "anchor config: input size " << input_size.width << "x" << input_size.height
        << " must have positive dimensions that are multiples of 32";
    throw ConfigError(msg.str());
  }
}

std::size_t AnchorAssignment::positive_count() const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), AnchorLabel::positive));
}

double box_iou(const Box& a, const Box& b) {
  require_valid(a, "box_iou");
  require_valid(b, "box_iou");
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::vector<Box>> generate_anchors(const AnchorConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<Box>> levels;
  levels.reserve(cfg.level_strides.size());
  for (std::size_t level = 0; level < cfg.level_strides.size(); ++level) {
    const int stride = cfg.level_strides[level];
    const double size = cfg.level_sizes[level];
    const int rows = grid_cells(cfg.input_size.height, stride);
    const int cols = grid_cells(cfg.input_size.width, stride);
    std::vector<Box> anchors;
    anchors.reserve(static_cast<std::size_t>(rows) * cols * cfg.ratios.size());
    for (int row = 0; row < rows; ++row) {
      for (int col = 0; col < cols; ++col) {
        const double cx = (col + 0.5) * stride;
        const double cy = (row + 0.5) * stride;
        for (double ratio : cfg.ratios) {
          const double w = size * std::sqrt(ratio);
          const double h = size / std::sqrt(ratio);
          anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
    levels.push_back(std::move(anchors));
  }
  return levels;
}

std::size_t anchor_count(const std::vector<std::vector<Box>>& levels) {
  std::size_t total = 0;
  for (const auto& level : levels) total += level.size();
  return total;
}

std::vector<Box> flatten_anchors(const std::vector<std::vector<Box>>& levels) {
  std::vector<Box> flat;
  flat.reserve(anchor_count(levels));
  for (const auto& level : levels) flat.insert(flat.end(), level.begin(), level.end());
  return flat;
}

RegressionDeltas encode_box(const Box& anchor, const Box& gt) {
  require_valid(anchor, "encode_box anchor");
  require_valid(gt, "encode_box ground truth");
  const double wa = anchor.width();
  const double ha = anchor.height();
  const double xa = anchor.xmin + 0.5 * wa;
  const double ya = anchor.ymin + 0.5 * ha;
  const double wg = gt.width();
  const double hg = gt.height();
  const double xg = gt.xmin + 0.5 * wg;
  const double yg = gt.ymin + 0.5 * hg;
  return {(xg - xa) / wa, (yg - ya) / ha, std::log(wg / wa), std::log(hg / ha)};
}

Box decode_box(const Box& anchor, const RegressionDeltas& d, bool* saturated) {
  require_valid(anchor, "decode_box anchor");
  double tw = d.tw;
  double th = d.th;
  bool clamped = false;
  if (std::abs(tw) > kMaxLogScale) {
    tw = std::copysign(kMaxLogScale, tw);
    clamped = true;
  }
  if (std::abs(th) > kMaxLogScale) {
    th = std::copysign(kMaxLogScale, th);
    clamped = true;
  }
  if (saturated) *saturated = clamped;
  const double wa = anchor.width();
  const double ha = anchor.height();
  const double cx = anchor.xmin + 0.5 * wa + d.tx * wa;
  const double cy = anchor.ymin + 0.5 * ha + d.ty * ha;
  const double w = wa * std::exp(tw);
  const double h = ha * std::exp(th);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::optional<Box> decode_box(const Box& anchor, const RegressionDeltas& d,
                              const ImageSize& bounds, bool* saturated) {
  Box b = decode_box(anchor, d, saturated);
  b.xmin = std::clamp(b.xmin, 0.0, static_cast<double>(bounds.width));
  b.xmax = std::clamp(b.xmax, 0.0, static_cast<double>(bounds.width));
  b.ymin = std::clamp(b.ymin, 0.0, static_cast<double>(bounds.height));
  b.ymax = std::clamp(b.ymax, 0.0, static_cast<double>(bounds.height));
  if (!b.valid()) return std::nullopt;
  return b;
}

std::vector<std::size_t> nms_indices(std::span<const LabeledBox> dets, double iou_thresh,
                                     NmsMode mode) {
  for (const LabeledBox& det : dets) {
    if (!det.score.has_value()) {
      throw InvalidInputError("nms: every detection must carry a score");
    }
    if (*det.score < 0.0 || *det.score > 1.0) {
      throw InvalidInputError("nms: score outside [0,1]");
    }
    require_valid(det.box, "nms");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (*dets[a].score != *dets[b].score) return *dets[a].score > *dets[b].score;
    return a < b;  // tie: ascending insertion index
  });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (mode == NmsMode::per_class && dets[k].class_id != dets[idx].class_id) continue;
      if (box_iou(dets[k].box, dets[idx].box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<LabeledBox> nms(std::span<const LabeledBox> dets, double iou_thresh, NmsMode mode) {
  std::vector<LabeledBox> out;
  for (std::size_t idx : nms_indices(dets, iou_thresh, mode)) out.push_back(dets[idx]);
  return out;
}

AnchorAssignment assign_targets(std::span<const Box> anchors, std::span<const LabeledBox> gt,
                                double pos_thresh, double neg_thresh) {
  if (!(0.0 <= neg_thresh && neg_thresh <= pos_thresh && pos_thresh <= 1.0)) {
    throw InvalidInputError("assign_targets: need 0 <= neg_thresh <= pos_thresh <= 1");
  }
  AnchorAssignment out;
  out.labels.assign(anchors.size(), AnchorLabel::negative);
  out.matched_gt.assign(anchors.size(), -1);
  if (gt.empty()) return out;

  // Best ground truth per anchor and best anchor per ground truth in one
  // sweep; ties resolve to the lowest index on both sides.
  std::vector<double> best_iou(anchors.size(), 0.0);
  std::vector<std::int64_t> best_gt(anchors.size(), -1);
  std::vector<double> gt_best_iou(gt.size(), 0.0);
  std::vector<std::int64_t> gt_best_anchor(gt.size(), -1);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double iou = box_iou(anchors[a], gt[g].box);
      if (iou > best_iou[a]) {
        best_iou[a] = iou;
        best_gt[a] = static_cast<std::int64_t>(g);
      }
      if (iou > gt_best_iou[g]) {
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = static_cast<std::int64_t>(a);
      }
    }
  }

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (best_gt[a] >= 0 && best_iou[a] >= pos_thresh) {
      out.labels[a] = AnchorLabel::positive;
      out.matched_gt[a] = best_gt[a];
    } else if (best_iou[a] >= neg_thresh) {
      out.labels[a] = AnchorLabel::ignore;
    }
  }

  // Forced matching: a ground-truth box that no anchor reaches at pos_thresh
  // claims its own best anchor. Later boxes override earlier ones when two
  // force the same anchor.
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (gt_best_iou[g] >= pos_thresh || gt_best_anchor[g] < 0 || gt_best_iou[g] <= 0.0) continue;
    const auto a = static_cast<std::size_t>(gt_best_anchor[g]);
    out.labels[a] = AnchorLabel::positive;
    out.matched_gt[a] = static_cast<std::int64_t>(g);
  }
  return out;
}

}  // namespace agridet
