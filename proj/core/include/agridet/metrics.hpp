// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agridet/geometry.hpp"

namespace agridet {

inline constexpr int kDefaultClassIds[] = {kClassHealthy, kClassStressed};

struct PixelGrid {
  int height = 0;
  int width = 0;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  void validate() const;  // throws InvalidInputError on nonpositive dims
};

class PixelMask {
 public:
  explicit PixelMask(const PixelGrid& grid);

  const PixelGrid& grid() const { return grid_; }
  bool test(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * grid_.width + col] != 0;
  }
  void set(int row, int col) {
    bits_[static_cast<std::size_t>(row) * grid_.width + col] = 1;
  }
  std::size_t count() const;
  std::span<const std::uint8_t> bits() const { return bits_; }

 private:
  PixelGrid grid_;
  std::vector<std::uint8_t> bits_;
};

/// Union of the boxes as a binary mask. Boxes use the inclusive integer
/// convention: coordinates are floored, then pixel (i, j) is covered when
/// xmin <= j <= xmax-1 and ymin <= i <= ymax-1, clamped to the grid. Boxes
/// fully outside the grid contribute nothing; overlaps are not counted
/// twice. Note this convention is distinct from the continuous-area one
/// used by box_iou and the two are never mixed.
PixelMask rasterize(std::span<const Box> boxes, const PixelGrid& grid);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& other);
};

/// Per-class pixel confusion between ground-truth and predicted box sets.
/// Classes are evaluated independently; a pixel covered by boxes of both
/// classes counts for both. Returns one entry per id in class_ids, in
/// order. Throws InvalidInputError on class ids outside the declared set.
std::vector<ConfusionCounts> pixel_confusion(std::span<const LabeledBox> gt,
                                             std::span<const LabeledBox> pred,
                                             const PixelGrid& grid,
                                             std::span<const int> class_ids = kDefaultClassIds);

struct ClassMetrics {
  double dsc = 0.0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool absent = false;  // degenerate rule fired: class had no pixels at all
};

/// DSC = 2TP/(2TP+FP+FN), IoU = TP/(TP+FP+FN), precision = TP/(TP+FP),
/// recall = TP/(TP+FN). Degenerate rules: all four are 1.0 when
/// TP=FP=FN=0 (absent class) and 0.0 when TP=0 with FP+FN>0.
ClassMetrics compute_metrics(const ConfusionCounts& c);

enum class AggregationMode {
  micro_pool,      // sum TP/FP/FN over images, then compute ratios
  per_image_mean,  // compute ratios per image, then average over images
};

struct MetricsReport {
  struct Entry {
    int class_id = 0;
    ConfusionCounts counts;  // pooled over images in both modes
    ClassMetrics metrics;
  };
  std::vector<Entry> classes;
  double macro_dsc = 0.0;  // mean DSC across classes
  AggregationMode mode = AggregationMode::micro_pool;
};

/// Fold per-image confusion counts into a report. per_image holds one
/// vector per image, aligned with class_ids. Throws InvalidInputError on
/// empty input or misaligned rows.
MetricsReport aggregate(std::span<const std::vector<ConfusionCounts>> per_image,
                        std::span<const int> class_ids = kDefaultClassIds,
                        AggregationMode mode = AggregationMode::micro_pool);

/// Line-oriented report serialization; class_names aligns with the report
/// entries. Format (one record per line, space separated):
///   agridet-metrics v1
///   mode <micro_pool|per_image_mean>
///   class <name> tp <n> fp <n> fn <n> dsc <v> iou <v> precision <v> recall <v>[ absent]
///   macro_dsc <v>
std::string serialize_report(const MetricsReport& report,
                             std::span<const std::string> class_names);

}  // namespace agridet
