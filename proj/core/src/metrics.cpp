// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agridet/errors.hpp"

namespace agridet {

namespace {

void format_value(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  os << buf;
}

}  // namespace

void PixelGrid::validate() const {
  if (height < 1 || width < 1) {
    std::ostringstream msg;
    msg << "pixel grid dimensions must be positive, got " << height << "x" << width;
    throw InvalidInputError(msg.str());
  }
}

PixelMask::PixelMask(const PixelGrid& grid) : grid_(grid) {
  grid_.validate();
  bits_.assign(grid_.pixel_count(), 0);
}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

PixelMask rasterize(std::span<const Box> boxes, const PixelGrid& grid) {
  PixelMask mask(grid);
  for (const Box& b : boxes) {
    const int x0 = std::clamp(static_cast<int>(std::floor(b.xmin)), 0, grid.width);
    const int x1 = std::clamp(static_cast<int>(std::floor(b.xmax)), 0, grid.width);
    const int y0 = std::clamp(static_cast<int>(std::floor(b.ymin)), 0, grid.height);
    const int y1 = std::clamp(static_cast<int>(std::floor(b.ymax)), 0, grid.height);
    for (int i = y0; i < y1; ++i) {
      for (int j = x0; j < x1; ++j) mask.set(i, j);
    }
  }
  return mask;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

std::vector<ConfusionCounts> pixel_confusion(std::span<const LabeledBox> gt,
                                             std::span<const LabeledBox> pred,
                                             const PixelGrid& grid,
                                             std::span<const int> class_ids) {
  grid.validate();
  auto check_classes = [&](std::span<const LabeledBox> set, const char* who) {
    for (const LabeledBox& lb : set) {
      if (std::find(class_ids.begin(), class_ids.end(), lb.class_id) == class_ids.end()) {
        std::ostringstream msg;
        msg << "pixel_confusion: " << who << " class id " << lb.class_id
            << " outside declared class set";
        throw InvalidInputError(msg.str());
      }
    }
  };
  check_classes(gt, "ground-truth");
  check_classes(pred, "prediction");

  std::vector<ConfusionCounts> out;
  out.reserve(class_ids.size());
  for (int cls : class_ids) {
    std::vector<Box> gt_boxes;
    std::vector<Box> pred_boxes;
    for (const LabeledBox& lb : gt) {
      if (lb.class_id == cls) gt_boxes.push_back(lb.box);
    }
    for (const LabeledBox& lb : pred) {
      if (lb.class_id == cls) pred_boxes.push_back(lb.box);
    }
    const PixelMask gt_mask = rasterize(gt_boxes, grid);
    const PixelMask pred_mask = rasterize(pred_boxes, grid);
    ConfusionCounts counts;
    const auto gt_bits = gt_mask.bits();
    const auto pred_bits = pred_mask.bits();
    for (std::size_t i = 0; i < gt_bits.size(); ++i) {
      counts.tp += gt_bits[i] & pred_bits[i];
      counts.fp += pred_bits[i] & static_cast<std::uint8_t>(1 - gt_bits[i]);
      counts.fn += gt_bits[i] & static_cast<std::uint8_t>(1 - pred_bits[i]);
    }
    out.push_back(counts);
  }
  return out;
}

ClassMetrics compute_metrics(const ConfusionCounts& c) {
  ClassMetrics m;
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
    m.dsc = m.iou = m.precision = m.recall = 1.0;
    m.absent = true;
    return m;
  }
  if (c.tp == 0) {
    m.dsc = m.iou = m.precision = m.recall = 0.0;
    return m;
  }
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  m.dsc = 2.0 * tp / (2.0 * tp + fp + fn);
  m.iou = tp / (tp + fp + fn);
  m.precision = tp / (tp + fp);
  m.recall = tp / (tp + fn);
  return m;
}

MetricsReport aggregate(std::span<const std::vector<ConfusionCounts>> per_image,
                        std::span<const int> class_ids, AggregationMode mode) {
  if (per_image.empty()) throw InvalidInputError("aggregate: need at least one image");
  for (const auto& row : per_image) {
    if (row.size() != class_ids.size()) {
      throw InvalidInputError("aggregate: per-image counts misaligned with class set");
    }
  }

  MetricsReport report;
  report.mode = mode;
  for (std::size_t c = 0; c < class_ids.size(); ++c) {
    MetricsReport::Entry entry;
    entry.class_id = class_ids[c];
    for (const auto& row : per_image) entry.counts += row[c];

    if (mode == AggregationMode::micro_pool) {
      entry.metrics = compute_metrics(entry.counts);
    } else {
      ClassMetrics mean;
      bool all_absent = true;
      for (const auto& row : per_image) {
        const ClassMetrics m = compute_metrics(row[c]);
        mean.dsc += m.dsc;
        mean.iou += m.iou;
        mean.precision += m.precision;
        mean.recall += m.recall;
        all_absent = all_absent && m.absent;
      }
      const double n = static_cast<double>(per_image.size());
      mean.dsc /= n;
      mean.iou /= n;
      mean.precision /= n;
      mean.recall /= n;
      mean.absent = all_absent;
      entry.metrics = mean;
    }
    report.classes.push_back(entry);
  }

  for (const auto& entry : report.classes) report.macro_dsc += entry.metrics.dsc;
  report.macro_dsc /= static_cast<double>(report.classes.size());
  return report;
}

std::string serialize_report(const MetricsReport& report,
                             std::span<const std::string> class_names) {
  if (class_names.size() != report.classes.size()) {
    throw InvalidInputError("serialize_report: class name list misaligned with report");
  }
  std::ostringstream os;
  os << "agridet-metrics v1\n";
  os << "mode "
     << (report.mode == AggregationMode::micro_pool ? "micro_pool" : "per_image_mean") << "\n";
  for (std::size_t i = 0; i < report.classes.size(); ++i) {
    const auto& e = report.classes[i];
    os << "class " << class_names[i] << " tp " << e.counts.tp << " fp " << e.counts.fp
       << " fn " << e.counts.fn << " dsc ";
    format_value(os, e.metrics.dsc);
    os << " iou ";
    format_value(os, e.metrics.iou);
    os << " precision ";
    format_value(os, e.metrics.precision);
    os << " recall ";
    format_value(os, e.metrics.recall);
    if (e.metrics.absent) os << " absent";
    os << "\n";
  }
  os << "macro_dsc ";
  format_value(os, report.macro_dsc);
  os << "\n";
  return os.str();
}

}  // namespace agridet
