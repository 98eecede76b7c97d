// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "agridet/geometry.hpp"

namespace agridet {

struct LossConfig {
  double alpha = 0.25;      // class-balance weight in (0,1)
  double gamma = 2.0;       // focusing exponent >= 0
  double beta = 1.0;        // smooth-L1 transition point > 0
  double box_weight = 1.0;  // relative weight of the regression term >= 0

  void validate() const;  // throws ConfigError
};

struct ScalarLossGrad {
  double value = 0.0;
  double grad = 0.0;
};

/// Focal classification loss of a single logit against target in {0,1}:
/// with p_t the predicted probability of the target class and
/// alpha_t = alpha for target 1, 1-alpha otherwise,
///   value = -alpha_t * (1-p_t)^gamma * ln(p_t).
/// log(p_t) is evaluated from the logit directly, so the result stays
/// accurate for |logit| well beyond 30. grad is d(value)/d(logit).
ScalarLossGrad focal_loss(double logit, int target, const LossConfig& cfg);

/// Huber-style regression loss of a residual:
///   value = 0.5 x^2 / beta   for |x| < beta,
///           |x| - 0.5 beta   otherwise,
/// with gradient x/beta resp. sign(x); both are continuous at |x| = beta.
ScalarLossGrad smooth_l1(double x, double beta);

struct DetectionLoss {
  double value = 0.0;           // classification + box_weight * regression
  double classification = 0.0;  // summed focal over non-ignored anchors / max(1, #pos)
  double regression = 0.0;      // summed smooth-L1 over positive deltas / max(1, #pos)
  std::vector<double> logit_grad;  // num_anchors * num_classes, anchor-major
  std::vector<double> delta_grad;  // num_anchors * 4, order (tx, ty, tw, th)
  std::size_t positives = 0;
};

/// Total detection loss with gradients w.r.t. every logit and delta.
/// logits is anchor-major with num_classes entries per anchor. targets
/// holds the encoded regression target per anchor; only entries for
/// positive anchors are read. gt supplies the class of each matched box.
DetectionLoss detection_loss(std::span<const double> logits, int num_classes,
                             std::span<const RegressionDeltas> deltas,
                             const AnchorAssignment& assignment,
                             std::span<const LabeledBox> gt,
                             std::span<const RegressionDeltas> targets,
                             const LossConfig& cfg);

}  // namespace agridet
