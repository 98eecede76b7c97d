// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "agridet/geometry.hpp"
#include "agridet/tensor.hpp"

namespace agridet {

/// Backbone stage widths. The stem runs at stride 2; c2..c5 sit at strides
/// 4, 8, 16, 32 relative to the input.
struct ChannelPlan {
  int input = 3;
  int stem = 32;
  int c2 = 64;
  int c3 = 128;
  int c4 = 256;
  int c5 = 512;
};

struct BackboneFeatures {
  Tensor c2, c3, c4, c5;
};

struct PyramidFeatures {
  Tensor p2, p3, p4, p5, p6;
};

/// Shape log of a forward pass, one record per named intermediate.
struct ForwardTrace {
  struct Record {
    std::string name;
    int height = 0;
    int width = 0;
    int channels = 0;
  };
  std::vector<Record> records;

  void add(const std::string& name, const Tensor& t);
  const Record* find(const std::string& name) const;
};

using ParamVisitor = std::function<void(const std::string& name, ConvSpec& spec)>;

/// Stand-in feature extractor: five stride-2 convolutions with seeded
/// random weights producing C2..C5. Deterministic per seed; any backbone
/// producing feature maps at strides 4/8/16/32 can replace it in front of
/// the pyramid.
class StubBackbone {
 public:
  StubBackbone(const ChannelPlan& plan, std::uint64_t seed);

  /// Requires H and W to be multiples of 32 (throws InvalidInputError) and
  /// the configured input channel count (throws ShapeError).
  BackboneFeatures forward(const Tensor& image, ForwardTrace* trace = nullptr) const;

  const ChannelPlan& plan() const { return plan_; }
  void visit_params(const ParamVisitor& visit);

 private:
  ChannelPlan plan_;
  ConvSpec stem_, stage2_, stage3_, stage4_, stage5_;
};

/// Top-down decoder over C2..C5:
///   P6 = conv3x3(C5, stride 2)
///   P5 = conv3x3(upsample(P6) + lateral1x1(C5))
///   P4 = conv3x3(upsample(P5) + lateral1x1(C4))
///   P3 = conv3x3(upsample(P4) + lateral1x1(C3))
///   P2 = conv3x3(upsample(P3) + lateral1x1(C2))
/// Every level carries `channels` (default 256) feature maps. When a level
/// has odd spatial size, the 2x-upsampled map overhangs the lateral map by
/// one row/column and is cropped to it; any other mismatch (or a channel
/// mismatch) raises ShapeError naming the merge.
class FeaturePyramid {
 public:
  FeaturePyramid(const ChannelPlan& plan, std::uint64_t seed, int channels = 256);

  PyramidFeatures forward(const BackboneFeatures& f, ForwardTrace* trace = nullptr) const;

  int channels() const { return channels_; }
  void visit_params(const ParamVisitor& visit);

  /// Diagnostic hook: re-initialize the lateral convolution of one level
  /// (2..5) with an off-by-one output channel count so the merge check
  /// trips. Used by the forward-check fault injection flag.
  void inject_lateral_channel_fault(int level);

 private:
  int channels_;
  ConvSpec lateral2_, lateral3_, lateral4_, lateral5_;
  ConvSpec post2_, post3_, post4_, post5_;
  ConvSpec p6_;
};

struct HeadConfig {
  int anchors_per_cell = 3;
  int num_classes = 2;
  int depth = 4;  // 3x3 convs per subnet before the output conv; 0 collapses
                  // each head to its output conv
  int channels = 256;
};

/// Flattened per-anchor network outputs, concatenated over levels P2..P6
/// in row-major cell order with the anchor index innermost, the same
/// order generate_anchors uses.
struct RawDetections {
  int num_classes = 2;
  std::vector<double> logits;           // count * num_classes
  std::vector<RegressionDeltas> deltas; // count

  std::size_t count() const { return deltas.size(); }
};

/// Classification and box-regression subnets, weights shared across
/// pyramid levels.
class DetectionHeads {
 public:
  DetectionHeads(const HeadConfig& cfg, std::uint64_t seed);

  RawDetections forward(const PyramidFeatures& p, ForwardTrace* trace = nullptr) const;

  const HeadConfig& config() const { return cfg_; }
  void visit_params(const ParamVisitor& visit);

 private:
  HeadConfig cfg_;
  std::vector<ConvSpec> cls_tower_, box_tower_;
  ConvSpec cls_out_, box_out_;
};

struct ModelConfig {
  ChannelPlan plan;
  HeadConfig heads;
  AnchorConfig anchors;
  double score_threshold = 0.7;  // boxes with scores strictly greater survive
  double nms_iou = 0.3;
  NmsMode nms_mode = NmsMode::per_class;

  void validate() const;
};

/// Score-filter, decode, and suppress raw detections against the anchor
/// set of cfg.anchors. Entries whose decoded box falls outside the image
/// are dropped.
std::vector<LabeledBox> postprocess_detections(const RawDetections& raw,
                                               std::span<const Box> anchors,
                                               const ModelConfig& cfg);

/// The full forward graph: backbone -> pyramid -> heads -> sigmoid scores
/// -> threshold -> decode -> per-class NMS.
class DetectorModel {
 public:
  DetectorModel(const ModelConfig& cfg, std::uint64_t seed);

  RawDetections raw_forward(const Tensor& image, ForwardTrace* trace = nullptr) const;
  std::vector<LabeledBox> detect(const Tensor& image) const;

  const ModelConfig& config() const { return cfg_; }
  const StubBackbone& backbone() const { return backbone_; }
  FeaturePyramid& pyramid() { return pyramid_; }
  const FeaturePyramid& pyramid() const { return pyramid_; }
  const DetectionHeads& heads() const { return heads_; }

  void visit_params(const ParamVisitor& visit);

  /// Weight interchange: a flat little-endian float32 blob plus a textual
  /// manifest line per parameter tensor
  ///   <name> <kernel> <stride> <cin> <cout> <weight offset> <bias offset>
  /// with offsets in bytes into the blob.
  void save_weights(const std::filesystem::path& blob,
                    const std::filesystem::path& manifest) const;
  void load_weights(const std::filesystem::path& blob, const std::filesystem::path& manifest);

 private:
  ModelConfig cfg_;
  StubBackbone backbone_;
  FeaturePyramid pyramid_;
  DetectionHeads heads_;
};

/// Free-function forms of the graph stages.
BackboneFeatures backbone_stub(const Tensor& image, const ChannelPlan& plan,
                               std::uint64_t seed);
PyramidFeatures build_pyramid(const BackboneFeatures& f, std::uint64_t seed,
                              int channels = 256);
RawDetections run_heads(const PyramidFeatures& p, const HeadConfig& cfg, std::uint64_t seed);

}  // namespace agridet
