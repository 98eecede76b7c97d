// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/losses.hpp"

#include <cmath>
#include <sstream>

#include "agridet/errors.hpp"

namespace agridet {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("loss config: alpha must be in (0,1)");
  if (!(gamma >= 0.0)) throw ConfigError("loss config: gamma must be >= 0");
  if (!(beta > 0.0)) throw ConfigError("loss config: beta must be > 0");
  if (!(box_weight >= 0.0)) throw ConfigError("loss config: box_weight must be >= 0");
}

ScalarLossGrad focal_loss(double logit, int target, const LossConfig& cfg) {
  cfg.validate();
  if (target != 0 && target != 1) {
    throw InvalidInputError("focal_loss: target must be 0 or 1");
  }
  if (!std::isfinite(logit)) throw InvalidInputError("focal_loss: logit must be finite");

  // Margin toward the target class: p_t = sigmoid(m), log p_t = -softplus(-m).
  const double m = target == 1 ? logit : -logit;
  const double p_t = stable_sigmoid(m);
  const double one_minus_pt = stable_sigmoid(-m);
  const double log_pt = -softplus(-m);
  const double alpha_t = target == 1 ? cfg.alpha : 1.0 - cfg.alpha;
  const double focus = std::pow(one_minus_pt, cfg.gamma);

  ScalarLossGrad out;
  out.value = -alpha_t * focus * log_pt;
  const double dvalue_dm = alpha_t * focus * (cfg.gamma * p_t * log_pt - one_minus_pt);
  out.grad = target == 1 ? dvalue_dm : -dvalue_dm;
  return out;
}

ScalarLossGrad smooth_l1(double x, double beta) {
  if (!(beta > 0.0)) throw ConfigError("smooth_l1: beta must be > 0");
  if (!std::isfinite(x)) throw InvalidInputError("smooth_l1: residual must be finite");
  ScalarLossGrad out;
  const double ax = std::abs(x);
  if (ax < beta) {
    out.value = 0.5 * x * x / beta;
    out.grad = x / beta;
  } else {
    out.value = ax - 0.5 * beta;
    out.grad = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

DetectionLoss detection_loss(std::span<const double> logits, int num_classes,
                             std::span<const RegressionDeltas> deltas,
                             const AnchorAssignment& assignment,
                             std::span<const LabeledBox> gt,
                             std::span<const RegressionDeltas> targets,
                             const LossConfig& cfg) {
  cfg.validate();
  const std::size_t n = assignment.labels.size();
  if (num_classes < 1) throw ConfigError("detection_loss: num_classes must be >= 1");
  if (logits.size() != n * static_cast<std::size_t>(num_classes) || deltas.size() != n ||
      targets.size() != n || assignment.matched_gt.size() != n) {
    std::ostringstream msg;
    msg << "detection_loss: arity mismatch (anchors " << n << ", logits " << logits.size()
        << ", deltas " << deltas.size() << ", targets " << targets.size() << ")";
    throw ShapeError(msg.str());
  }

  DetectionLoss out;
  out.logit_grad.assign(logits.size(), 0.0);
  out.delta_grad.assign(n * 4, 0.0);
  out.positives = assignment.positive_count();
  const double norm = static_cast<double>(std::max<std::size_t>(1, out.positives));

  for (std::size_t a = 0; a < n; ++a) {
    const AnchorLabel label = assignment.labels[a];
    if (label == AnchorLabel::ignore) continue;

    int positive_class = -1;
    if (label == AnchorLabel::positive) {
      const std::int64_t g = assignment.matched_gt[a];
      if (g < 0 || g >= static_cast<std::int64_t>(gt.size())) {
        throw InvalidInputError("detection_loss: positive anchor without matched ground truth");
      }
      positive_class = gt[static_cast<std::size_t>(g)].class_id;
      if (positive_class < 0 || positive_class >= num_classes) {
        throw InvalidInputError("detection_loss: matched class outside declared class set");
      }
    }

    for (int k = 0; k < num_classes; ++k) {
      const std::size_t idx = a * num_classes + k;
      const int target = k == positive_class ? 1 : 0;
      const ScalarLossGrad f = focal_loss(logits[idx], target, cfg);
      out.classification += f.value;
      out.logit_grad[idx] = f.grad / norm;
    }

    if (label == AnchorLabel::positive) {
      const RegressionDeltas& pred = deltas[a];
      const RegressionDeltas& tgt = targets[a];
      const double residuals[4] = {pred.tx - tgt.tx, pred.ty - tgt.ty, pred.tw - tgt.tw,
                                   pred.th - tgt.th};
      for (int c = 0; c < 4; ++c) {
        const ScalarLossGrad s = smooth_l1(residuals[c], cfg.beta);
        out.regression += s.value;
        out.delta_grad[a * 4 + c] = cfg.box_weight * s.grad / norm;
      }
    }
  }

  out.classification /= norm;
  out.regression /= norm;
  out.value = out.classification + cfg.box_weight * out.regression;
  return out;
}

}  // namespace agridet
