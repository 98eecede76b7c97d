// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "agridet/errors.hpp"
#include "agridet/random.hpp"

namespace agridet {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string shape_string(const Tensor& t) {
  std::ostringstream os;
  os << t.height() << "x" << t.width() << "x" << t.channels();
  return os.str();
}

// Crop the 2x-upsampled top-down map to the lateral map before merging.
// An odd lateral level upsamples to lateral+1 in that axis; anything else
// is a real wiring error and is reported against the named merge.
Tensor merge_topdown(const Tensor& upsampled, const Tensor& lateral, const char* merge_name) {
  if (upsampled.channels() != lateral.channels() ||
      upsampled.height() < lateral.height() || upsampled.width() < lateral.width() ||
      upsampled.height() > lateral.height() + 1 || upsampled.width() > lateral.width() + 1) {
    std::ostringstream msg;
    msg << merge_name << ": upsampled top-down map " << shape_string(upsampled)
        << " does not match lateral map " << shape_string(lateral);
    throw ShapeError(msg.str());
  }
  if (upsampled.same_shape(lateral)) return add_elementwise(upsampled, lateral);
  Tensor cropped(lateral.height(), lateral.width(), lateral.channels());
  const std::size_t row_values =
      static_cast<std::size_t>(lateral.width()) * lateral.channels();
  for (int i = 0; i < lateral.height(); ++i) {
    const double* src = upsampled.row_ptr(i);
    std::copy(src, src + row_values, cropped.row_ptr(i));
  }
  return add_elementwise(cropped, lateral);
}

void write_le_f32(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                         static_cast<char>((bits >> 16) & 0xFF),
                         static_cast<char>((bits >> 24) & 0xFF)};
  out.write(bytes, 4);
}

double read_le_f32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw IoError("weight blob: truncated payload");
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void ForwardTrace::add(const std::string& name, const Tensor& t) {
  records.push_back({name, t.height(), t.width(), t.channels()});
}

const ForwardTrace::Record* ForwardTrace::find(const std::string& name) const {
  for (const Record& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

StubBackbone::StubBackbone(const ChannelPlan& plan, std::uint64_t seed) : plan_(plan) {
  Rng rng(seed);
  stem_ = ConvSpec::random_init(3, 2, plan.input, plan.stem, rng);
  stage2_ = ConvSpec::random_init(3, 2, plan.stem, plan.c2, rng);
  stage3_ = ConvSpec::random_init(3, 2, plan.c2, plan.c3, rng);
  stage4_ = ConvSpec::random_init(3, 2, plan.c3, plan.c4, rng);
  stage5_ = ConvSpec::random_init(3, 2, plan.c4, plan.c5, rng);
}

BackboneFeatures StubBackbone::forward(const Tensor& image, ForwardTrace* trace) const {
  if (image.height() % 32 != 0 || image.width() % 32 != 0) {
    std::ostringstream msg;
    msg << "backbone: input " << image.height() << "x" << image.width()
        << " must have dimensions that are multiples of 32";
    throw InvalidInputError(msg.str());
  }
  if (image.channels() != plan_.input) {
    std::ostringstream msg;
    msg << "backbone: input has " << image.channels() << " channels, expected " << plan_.input;
    throw ShapeError(msg.str());
  }
  BackboneFeatures f;
  const Tensor stem = relu(conv2d(image, stem_));
  f.c2 = relu(conv2d(stem, stage2_));
  f.c3 = relu(conv2d(f.c2, stage3_));
  f.c4 = relu(conv2d(f.c3, stage4_));
  f.c5 = relu(conv2d(f.c4, stage5_));
  if (trace) {
    trace->add("C2", f.c2);
    trace->add("C3", f.c3);
    trace->add("C4", f.c4);
    trace->add("C5", f.c5);
  }
  return f;
}

void StubBackbone::visit_params(const ParamVisitor& visit) {
  visit("backbone.stem", stem_);
  visit("backbone.stage2", stage2_);
  visit("backbone.stage3", stage3_);
  visit("backbone.stage4", stage4_);
  visit("backbone.stage5", stage5_);
}

FeaturePyramid::FeaturePyramid(const ChannelPlan& plan, std::uint64_t seed, int channels)
    : channels_(channels) {
  if (channels < 1) throw ConfigError("feature pyramid: channels must be >= 1");
  Rng rng(seed);
  lateral2_ = ConvSpec::random_init(1, 1, plan.c2, channels, rng);
  lateral3_ = ConvSpec::random_init(1, 1, plan.c3, channels, rng);
  lateral4_ = ConvSpec::random_init(1, 1, plan.c4, channels, rng);
  lateral5_ = ConvSpec::random_init(1, 1, plan.c5, channels, rng);
  post2_ = ConvSpec::random_init(3, 1, channels, channels, rng);
  post3_ = ConvSpec::random_init(3, 1, channels, channels, rng);
  post4_ = ConvSpec::random_init(3, 1, channels, channels, rng);
  post5_ = ConvSpec::random_init(3, 1, channels, channels, rng);
  p6_ = ConvSpec::random_init(3, 2, plan.c5, channels, rng);
}

PyramidFeatures FeaturePyramid::forward(const BackboneFeatures& f, ForwardTrace* trace) const {
  auto check_halving = [](const Tensor& upper, const Tensor& lower, const char* pair) {
    const int want_h = (upper.height() + 1) / 2;
    const int want_w = (upper.width() + 1) / 2;
    if (lower.height() != want_h || lower.width() != want_w) {
      std::ostringstream msg;
      msg << "pyramid: " << pair << " strides inconsistent (" << shape_string(upper) << " -> "
          << shape_string(lower) << ")";
      throw ShapeError(msg.str());
    }
  };
  check_halving(f.c2, f.c3, "C2/C3");
  check_halving(f.c3, f.c4, "C3/C4");
  check_halving(f.c4, f.c5, "C4/C5");

  PyramidFeatures p;
  p.p6 = relu(conv2d(f.c5, p6_));

  struct Step {
    const char* level;
    const Tensor* backbone;
    const ConvSpec* lateral;
    const ConvSpec* post;
  };
  const Step steps[] = {{"P5", &f.c5, &lateral5_, &post5_},
                        {"P4", &f.c4, &lateral4_, &post4_},
                        {"P3", &f.c3, &lateral3_, &post3_},
                        {"P2", &f.c2, &lateral2_, &post2_}};
  if (trace) trace->add("P6", p.p6);

  const Tensor* top = &p.p6;
  Tensor* outputs[] = {&p.p5, &p.p4, &p.p3, &p.p2};
  for (std::size_t i = 0; i < 4; ++i) {
    const Step& step = steps[i];
    const Tensor up = upsample_nearest_2x(*top);
    const Tensor lateral = relu(conv2d(*step.backbone, *step.lateral));
    if (trace) {
      trace->add(std::string("upsample(") + (i == 0 ? "P6" : steps[i - 1].level) + ")", up);
      trace->add(std::string("lateral(C") + step.level[1] + ")", lateral);
    }
    std::string merge_name = std::string(step.level) + " merge";
    const Tensor merged = merge_topdown(up, lateral, merge_name.c_str());
    if (trace) trace->add(std::string(step.level) + " merged", merged);
    *outputs[i] = relu(conv2d(merged, *step.post));
    if (trace) trace->add(step.level, *outputs[i]);
    top = outputs[i];
  }
  return p;
}

void FeaturePyramid::visit_params(const ParamVisitor& visit) {
  visit("fpn.lateral2", lateral2_);
  visit("fpn.lateral3", lateral3_);
  visit("fpn.lateral4", lateral4_);
  visit("fpn.lateral5", lateral5_);
  visit("fpn.post2", post2_);
  visit("fpn.post3", post3_);
  visit("fpn.post4", post4_);
  visit("fpn.post5", post5_);
  visit("fpn.p6", p6_);
}

void FeaturePyramid::inject_lateral_channel_fault(int level) {
  ConvSpec* laterals[] = {&lateral2_, &lateral3_, &lateral4_, &lateral5_};
  if (level < 2 || level > 5) {
    throw ConfigError("fault injection: lateral level must be in 2..5");
  }
  ConvSpec& target = *laterals[level - 2];
  Rng rng(splitmix64(static_cast<std::uint64_t>(level)));
  target = ConvSpec::random_init(1, 1, target.in_channels, target.out_channels + 1, rng);
}

DetectionHeads::DetectionHeads(const HeadConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.anchors_per_cell < 1 || cfg.num_classes < 1 || cfg.depth < 0 || cfg.channels < 1) {
    throw ConfigError("head config: anchors/classes/channels must be >= 1 and depth >= 0");
  }
  Rng rng(seed);
  for (int d = 0; d < cfg.depth; ++d) {
    cls_tower_.push_back(ConvSpec::random_init(3, 1, cfg.channels, cfg.channels, rng));
  }
  cls_out_ = ConvSpec::random_init(3, 1, cfg.channels,
                                   cfg.anchors_per_cell * cfg.num_classes, rng);
  for (int d = 0; d < cfg.depth; ++d) {
    box_tower_.push_back(ConvSpec::random_init(3, 1, cfg.channels, cfg.channels, rng));
  }
  box_out_ = ConvSpec::random_init(3, 1, cfg.channels, cfg.anchors_per_cell * 4, rng);
}

RawDetections DetectionHeads::forward(const PyramidFeatures& p, ForwardTrace* trace) const {
  RawDetections raw;
  raw.num_classes = cfg_.num_classes;

  const Tensor* levels[] = {&p.p2, &p.p3, &p.p4, &p.p5, &p.p6};
  const char* names[] = {"P2", "P3", "P4", "P5", "P6"};
  for (int l = 0; l < 5; ++l) {
    const Tensor& feature = *levels[l];
    if (feature.channels() != cfg_.channels) {
      std::ostringstream msg;
      msg << "heads: " << names[l] << " has " << feature.channels()
          << " channels, expected " << cfg_.channels;
      throw ShapeError(msg.str());
    }
    Tensor cls = feature;
    for (const ConvSpec& conv : cls_tower_) cls = relu(conv2d(cls, conv));
    cls = conv2d(cls, cls_out_);  // logits: no activation
    Tensor box = feature;
    for (const ConvSpec& conv : box_tower_) box = relu(conv2d(box, conv));
    box = conv2d(box, box_out_);
    if (trace) {
      trace->add(std::string(names[l]) + " cls", cls);
      trace->add(std::string(names[l]) + " box", box);
    }

    const int anchors = cfg_.anchors_per_cell;
    for (int i = 0; i < cls.height(); ++i) {
      for (int j = 0; j < cls.width(); ++j) {
        for (int a = 0; a < anchors; ++a) {
          for (int k = 0; k < cfg_.num_classes; ++k) {
            raw.logits.push_back(cls.at(i, j, a * cfg_.num_classes + k));
          }
          raw.deltas.push_back({box.at(i, j, a * 4 + 0), box.at(i, j, a * 4 + 1),
                                box.at(i, j, a * 4 + 2), box.at(i, j, a * 4 + 3)});
        }
      }
    }
  }
  return raw;
}

void DetectionHeads::visit_params(const ParamVisitor& visit) {
  for (std::size_t d = 0; d < cls_tower_.size(); ++d) {
    visit("heads.cls.tower" + std::to_string(d), cls_tower_[d]);
  }
  visit("heads.cls.out", cls_out_);
  for (std::size_t d = 0; d < box_tower_.size(); ++d) {
    visit("heads.box.tower" + std::to_string(d), box_tower_[d]);
  }
  visit("heads.box.out", box_out_);
}

void ModelConfig::validate() const {
  anchors.validate();
  if (!(score_threshold >= 0.0)) {
    throw ConfigError("model config: score threshold must be >= 0");
  }
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) {
    throw ConfigError("model config: nms iou must be in [0,1]");
  }
  if (heads.anchors_per_cell != static_cast<int>(anchors.ratios.size())) {
    throw ConfigError("model config: head anchors-per-cell must match the ratio count");
  }
}

std::vector<LabeledBox> postprocess_detections(const RawDetections& raw,
                                               std::span<const Box> anchors,
                                               const ModelConfig& cfg) {
  if (raw.count() != anchors.size()) {
    std::ostringstream msg;
    msg << "postprocess: raw detection count " << raw.count() << " does not match anchor count "
        << anchors.size();
    throw ShapeError(msg.str());
  }
  std::vector<LabeledBox> candidates;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (int k = 0; k < raw.num_classes; ++k) {
      const double score = stable_sigmoid(raw.logits[i * raw.num_classes + k]);
      if (!(score > cfg.score_threshold)) continue;
      const auto decoded = decode_box(anchors[i], raw.deltas[i], cfg.anchors.input_size);
      if (!decoded) continue;
      candidates.push_back({*decoded, k, score});
    }
  }
  return nms(candidates, cfg.nms_iou, cfg.nms_mode);
}

DetectorModel::DetectorModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      backbone_(cfg.plan, derive_seed(seed, 1)),
      pyramid_(cfg.plan, derive_seed(seed, 2), cfg.heads.channels),
      heads_(cfg.heads, derive_seed(seed, 3)) {
  cfg_.validate();
}

RawDetections DetectorModel::raw_forward(const Tensor& image, ForwardTrace* trace) const {
  const BackboneFeatures f = backbone_.forward(image, trace);
  const PyramidFeatures p = pyramid_.forward(f, trace);
  return heads_.forward(p, trace);
}

std::vector<LabeledBox> DetectorModel::detect(const Tensor& image) const {
  if (image.height() != cfg_.anchors.input_size.height ||
      image.width() != cfg_.anchors.input_size.width) {
    std::ostringstream msg;
    msg << "detect: image " << image.height() << "x" << image.width()
        << " does not match configured input size " << cfg_.anchors.input_size.height << "x"
        << cfg_.anchors.input_size.width;
    throw InvalidInputError(msg.str());
  }
  const RawDetections raw = raw_forward(image);
  const std::vector<Box> anchors = flatten_anchors(generate_anchors(cfg_.anchors));
  return postprocess_detections(raw, anchors, cfg_);
}

void DetectorModel::visit_params(const ParamVisitor& visit) {
  backbone_.visit_params(visit);
  pyramid_.visit_params(visit);
  heads_.visit_params(visit);
}

void DetectorModel::save_weights(const std::filesystem::path& blob,
                                 const std::filesystem::path& manifest) const {
  std::ofstream blob_out(blob, std::ios::binary);
  if (!blob_out) throw IoError("cannot create weight blob " + blob.string());
  std::ofstream manifest_out(manifest);
  if (!manifest_out) throw IoError("cannot create weight manifest " + manifest.string());
  manifest_out << "agridet-weights v1 le f32\n";

  std::uint64_t offset = 0;
  auto* self = const_cast<DetectorModel*>(this);
  self->visit_params([&](const std::string& name, ConvSpec& spec) {
    const std::uint64_t weight_offset = offset;
    for (double w : spec.weights) write_le_f32(blob_out, w);
    offset += 4 * spec.weights.size();
    const std::uint64_t bias_offset = offset;
    for (double b : spec.bias) write_le_f32(blob_out, b);
    offset += 4 * spec.bias.size();
    manifest_out << name << " " << spec.kernel << " " << spec.stride << " " << spec.in_channels
                 << " " << spec.out_channels << " " << weight_offset << " " << bias_offset
                 << "\n";
  });
  blob_out.flush();
  manifest_out.flush();
  if (!blob_out || !manifest_out) throw IoError("weight export failed");
}

void DetectorModel::load_weights(const std::filesystem::path& blob,
                                 const std::filesystem::path& manifest) {
  std::ifstream manifest_in(manifest);
  if (!manifest_in) throw IoError("cannot open weight manifest " + manifest.string());
  std::string header;
  std::getline(manifest_in, header);
  if (header != "agridet-weights v1 le f32") {
    throw ParseError("weight manifest: unsupported header '" + header + "'");
  }

  struct Entry {
    int kernel, stride, cin, cout;
    std::uint64_t weight_offset, bias_offset;
  };
  std::map<std::string, Entry> entries;
  std::string line;
  int line_no = 1;
  while (std::getline(manifest_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name;
    Entry e{};
    if (!(fields >> name >> e.kernel >> e.stride >> e.cin >> e.cout >> e.weight_offset >>
          e.bias_offset)) {
      throw ParseError("weight manifest:" + std::to_string(line_no) + ": malformed entry");
    }
    entries[name] = e;
  }

  std::ifstream blob_in(blob, std::ios::binary);
  if (!blob_in) throw IoError("cannot open weight blob " + blob.string());

  visit_params([&](const std::string& name, ConvSpec& spec) {
    const auto found = entries.find(name);
    if (found == entries.end()) {
      throw ParseError("weight manifest: missing entry for " + name);
    }
    const Entry& e = found->second;
    if (e.kernel != spec.kernel || e.stride != spec.stride || e.cin != spec.in_channels ||
        e.cout != spec.out_channels) {
      std::ostringstream msg;
      msg << "weight manifest: " << name << " dims " << e.kernel << "/" << e.stride << "/"
          << e.cin << "/" << e.cout << " do not match model " << spec.kernel << "/"
          << spec.stride << "/" << spec.in_channels << "/" << spec.out_channels;
      throw ShapeError(msg.str());
    }
    blob_in.seekg(static_cast<std::streamoff>(e.weight_offset));
    for (double& w : spec.weights) w = read_le_f32(blob_in);
    blob_in.seekg(static_cast<std::streamoff>(e.bias_offset));
    for (double& b : spec.bias) b = read_le_f32(blob_in);
  });
}

BackboneFeatures backbone_stub(const Tensor& image, const ChannelPlan& plan,
                               std::uint64_t seed) {
  return StubBackbone(plan, seed).forward(image);
}

PyramidFeatures build_pyramid(const BackboneFeatures& f, std::uint64_t seed, int channels) {
  ChannelPlan plan;
  plan.c2 = f.c2.channels();
  plan.c3 = f.c3.channels();
  plan.c4 = f.c4.channels();
  plan.c5 = f.c5.channels();
  return FeaturePyramid(plan, seed, channels).forward(f);
}

RawDetections run_heads(const PyramidFeatures& p, const HeadConfig& cfg, std::uint64_t seed) {
  return DetectionHeads(cfg, seed).forward(p);
}

}  // namespace agridet
