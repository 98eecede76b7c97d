// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch front end wiring the agridet library into reproducible pipelines.
// Subcommands: validate, augment, anchors, postprocess, eval,
// forward-check, overlay, compose-bands. Every command is deterministic
// under a fixed seed and never mutates its inputs.
//
// Exit codes: 0 success, 2 configuration, 3 parse, 4 I/O,
// 5 invariant/shape failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agridet/augment.hpp"
#include "agridet/dataio.hpp"
#include "agridet/errors.hpp"
#include "agridet/geometry.hpp"
#include "agridet/image.hpp"
#include "agridet/losses.hpp"
#include "agridet/metrics.hpp"
#include "agridet/network.hpp"
#include "agridet/random.hpp"

namespace {

namespace fs = std::filesystem;
using namespace agridet;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitIo = 4;
constexpr int kExitInvariant = 5;

struct OutputSink {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit OutputSink(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw IoError("cannot create output file " + path);
    stream = &file;
  }
  std::ostream& out() { return *stream; }
};

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

ClassMap load_class_map(const std::string& spec) {
  // "name=id,name=id"; empty means the default classes.
  if (spec.empty()) return ClassMap();
  std::vector<std::pair<std::string, int>> entries;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("class map entry '" + item + "' must look like name=id");
    }
    try {
      entries.emplace_back(item.substr(0, eq), std::stoi(item.substr(eq + 1)));
    } catch (const std::exception&) {
      throw ConfigError("class map entry '" + item + "' has a non-numeric id");
    }
  }
  return ClassMap(std::move(entries));
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const std::string& root, const std::string& classes_spec,
                 const std::string& out_path) {
  OutputSink sink(out_path);
  const ClassMap classes = load_class_map(classes_spec);
  ScanReport scan;
  const DatasetManifest manifest = scan_dataset(root, &scan, "train", classes);

  int errors = 0;
  for (const std::string& warning : scan.warnings) {
    sink.out() << "warning: " << warning << "\n";
  }
  for (const ManifestEntry& entry : manifest.entries) {
    try {
      const Annotation ann = read_annotation_file(entry.annotation, classes);
      (void)ann;
    } catch (const ParseError& err) {
      sink.out() << "error: " << err.what() << "\n";
      ++errors;
    }
  }
  sink.out() << "checked " << manifest.entries.size() << " pairs, " << errors << " errors, "
             << scan.warnings.size() << " warnings\n";
  return errors == 0 ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// augment

int cmd_augment(const std::string& manifest_path, const std::string& out_dir,
                const AugmentSpec& spec, int jobs) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  if (manifest.split != "train") {
    throw ConfigError("augment only accepts training-split manifests, got split '" +
                      manifest.split + "'");
  }
  const AugmentOutcome outcome = augment_dataset(manifest, spec, out_dir, jobs);
  save_manifest(outcome.manifest, fs::path(out_dir) / "manifest.txt");
  for (const std::string& err : outcome.errors) std::cerr << "error: " << err << "\n";
  std::cout << "wrote " << outcome.manifest.entries.size() << " images to " << out_dir << "\n";
  return outcome.errors.empty() ? kExitOk : kExitIo;
}

// ---------------------------------------------------------------------------
// anchors

int cmd_anchors(const AnchorConfig& cfg, const std::string& dump_path,
                const std::string& out_path) {
  OutputSink sink(out_path);
  const auto levels = generate_anchors(cfg);
  std::size_t total = 0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const int stride = cfg.level_strides[l];
    const int rows = (cfg.input_size.height + stride - 1) / stride;
    const int cols = (cfg.input_size.width + stride - 1) / stride;
    sink.out() << "level " << l << " stride " << stride << " size " << cfg.level_sizes[l]
               << " grid " << rows << "x" << cols << " anchors " << levels[l].size() << "\n";
    total += levels[l].size();
  }
  sink.out() << "total " << total << "\n";

  if (!dump_path.empty()) {
    std::ofstream dump(dump_path);
    if (!dump) throw IoError("cannot create anchor dump " + dump_path);
    dump << "level\tindex\txmin\tymin\txmax\tymax\n";
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (std::size_t i = 0; i < levels[l].size(); ++i) {
        const Box& b = levels[l][i];
        dump << l << "\t" << i << "\t" << format_number(b.xmin) << "\t"
             << format_number(b.ymin) << "\t" << format_number(b.xmax) << "\t"
             << format_number(b.ymax) << "\n";
      }
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// postprocess

int cmd_postprocess(const std::string& in_path, const std::string& out_path,
                    double score_threshold, double nms_iou, bool class_agnostic,
                    const std::string& classes_spec) {
  const ClassMap classes = load_class_map(classes_spec);
  const std::vector<DetectionRecord> records = read_detections_file(in_path, classes);

  std::map<std::string, std::vector<DetectionRecord>> by_image;
  for (const DetectionRecord& rec : records) {
    if (rec.score > score_threshold) by_image[rec.image_id].push_back(rec);
  }

  std::vector<DetectionRecord> kept;
  for (const auto& [image_id, group] : by_image) {
    std::vector<LabeledBox> boxes;
    boxes.reserve(group.size());
    for (const DetectionRecord& rec : group) {
      boxes.push_back({rec.box, rec.class_id, rec.score});
    }
    const auto kept_indices = nms_indices(
        boxes, nms_iou, class_agnostic ? NmsMode::class_agnostic : NmsMode::per_class);
    for (std::size_t idx : kept_indices) kept.push_back(group[idx]);
  }
  write_detections_file(out_path, kept, classes);
  std::cout << "kept " << kept.size() << " of " << records.size() << " detections\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& dataset, const std::string& detections_path, bool per_image,
             bool per_image_mean, const std::string& classes_spec,
             const std::string& out_path) {
  OutputSink sink(out_path);
  const ClassMap classes = load_class_map(classes_spec);

  DatasetManifest manifest;
  if (fs::is_directory(dataset)) {
    manifest = scan_dataset(dataset, nullptr, "test", classes);
  } else {
    manifest = load_manifest(dataset);
  }
  const std::vector<DetectionRecord> records = read_detections_file(detections_path, classes);

  std::map<std::string, std::vector<LabeledBox>> detections_by_image;
  for (const DetectionRecord& rec : records) {
    detections_by_image[rec.image_id].push_back({rec.box, rec.class_id, rec.score});
  }

  std::map<std::string, const ManifestEntry*> entries_by_id;
  for (const ManifestEntry& entry : manifest.entries) {
    entries_by_id[entry.image.stem().string()] = &entry;
  }
  std::vector<std::string> unresolved;
  for (const auto& [image_id, _] : detections_by_image) {
    if (!entries_by_id.count(image_id)) unresolved.push_back(image_id);
  }
  if (!unresolved.empty()) {
    std::ostringstream msg;
    msg << "detections reference unknown image ids:";
    for (const std::string& id : unresolved) msg << " " << id;
    throw InvalidInputError(msg.str());
  }

  const std::vector<int> class_ids = classes.ids();
  std::vector<std::vector<ConfusionCounts>> per_image_counts;
  std::vector<std::string> image_ids;
  for (const ManifestEntry& entry : manifest.entries) {
    const Annotation ann = read_annotation_file(entry.annotation, classes);
    const std::string image_id = entry.image.stem().string();
    const auto found = detections_by_image.find(image_id);
    static const std::vector<LabeledBox> kNone;
    const std::vector<LabeledBox>& preds =
        found == detections_by_image.end() ? kNone : found->second;
    const PixelGrid grid{ann.height, ann.width};
    per_image_counts.push_back(pixel_confusion(ann.objects, preds, grid, class_ids));
    image_ids.push_back(image_id);
  }
  if (per_image_counts.empty()) {
    throw InvalidInputError("eval: dataset contains no image/annotation pairs");
  }

  const MetricsReport report =
      aggregate(per_image_counts, class_ids,
                per_image_mean ? AggregationMode::per_image_mean : AggregationMode::micro_pool);

  // Table layout: one row per class, the four ratios, then the macro mean.
  sink.out() << "class\tdsc\tiou\tprecision\trecall\n";
  const std::vector<std::string> names = classes.names_by_id();
  for (std::size_t i = 0; i < report.classes.size(); ++i) {
    const auto& m = report.classes[i].metrics;
    sink.out() << names[i] << "\t" << format_number(m.dsc) << "\t" << format_number(m.iou)
               << "\t" << format_number(m.precision) << "\t" << format_number(m.recall)
               << (m.absent ? "\t(absent)" : "") << "\n";
  }
  sink.out() << "macro_dsc\t" << format_number(report.macro_dsc) << "\n";

  if (per_image) {
    sink.out() << "\nimage\tclass\ttp\tfp\tfn\n";
    for (std::size_t i = 0; i < per_image_counts.size(); ++i) {
      for (std::size_t c = 0; c < class_ids.size(); ++c) {
        const ConfusionCounts& counts = per_image_counts[i][c];
        sink.out() << image_ids[i] << "\t" << names[c] << "\t" << counts.tp << "\t"
                   << counts.fp << "\t" << counts.fn << "\n";
      }
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// forward-check

int cmd_forward_check(int size, std::uint64_t seed, int depth, int fault_lateral,
                      const std::string& out_path) {
  OutputSink sink(out_path);
  ModelConfig cfg;
  cfg.anchors.input_size = {size, size};
  cfg.heads.depth = depth;
  cfg.anchors.validate();

  DetectorModel model(cfg, seed);
  if (fault_lateral != 0) model.pyramid().inject_lateral_channel_fault(fault_lateral);

  Rng rng(derive_seed(seed, 99));
  Tensor image(size, size, cfg.plan.input);
  for (double& v : image.values()) v = rng.uniform();

  ForwardTrace trace;
  const RawDetections raw = model.raw_forward(image, &trace);
  for (const auto& rec : trace.records) {
    sink.out() << rec.name << " " << rec.height << "x" << rec.width << "x" << rec.channels
               << "\n";
  }
  sink.out() << "raw_detections " << raw.count() << "\n";

  // Invariant checks: pyramid sizes, channel widths, and the anchor-count
  // equality with the geometry module.
  const char* levels[] = {"P2", "P3", "P4", "P5", "P6"};
  for (int l = 0; l < 5; ++l) {
    const auto* rec = trace.find(levels[l]);
    if (!rec) throw ShapeError(std::string("forward-check: missing trace for ") + levels[l]);
    const int stride = cfg.anchors.level_strides[l];
    const int want = (size + stride - 1) / stride;
    if (rec->height != want || rec->width != want || rec->channels != cfg.heads.channels) {
      std::ostringstream msg;
      msg << "forward-check: " << levels[l] << " is " << rec->height << "x" << rec->width
          << "x" << rec->channels << ", expected " << want << "x" << want << "x"
          << cfg.heads.channels;
      throw ShapeError(msg.str());
    }
  }
  const std::size_t expected = anchor_count(generate_anchors(cfg.anchors));
  if (raw.count() != expected) {
    std::ostringstream msg;
    msg << "forward-check: raw detection count " << raw.count() << " != anchor count "
        << expected;
    throw ShapeError(msg.str());
  }
  sink.out() << "ok\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// overlay

int cmd_overlay(const std::string& image_path, const std::string& detections_path,
                std::string image_id, const std::string& out_path,
                const std::string& classes_spec) {
  const ClassMap classes = load_class_map(classes_spec);
  ImageBuffer image = read_pnm_file(image_path);
  if (image.channels() == 1) {
    // Promote grayscale so colored edges are representable.
    ImageBuffer rgb(image.width(), image.height(), 3);
    for (int i = 0; i < image.height(); ++i) {
      for (int j = 0; j < image.width(); ++j) {
        for (int c = 0; c < 3; ++c) rgb.at(i, j, c) = image.at(i, j, 0);
      }
    }
    image = std::move(rgb);
  }
  if (image_id.empty()) image_id = fs::path(image_path).stem().string();

  const std::vector<DetectionRecord> records = read_detections_file(detections_path, classes);
  std::vector<DetectionRecord> drawn;
  for (const DetectionRecord& rec : records) {
    if (rec.image_id != image_id) continue;
    draw_box_outline(image, rec.box,
                     rec.class_id == kClassStressed ? kStressedColor : kHealthyColor);
    drawn.push_back(rec);
  }
  write_pnm_file(out_path, image);

  // Scores go to a sidecar table next to the overlay; raster text stays out
  // of the image itself.
  fs::path sidecar(out_path);
  sidecar.replace_extension(".scores.tsv");
  write_detections_file(sidecar, drawn, classes);
  std::cout << "drew " << drawn.size() << " boxes\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compose-bands

int cmd_compose_bands(const std::string& g_path, const std::string& r_path,
                      const std::string& re_path, const std::string& nir_path,
                      const std::string& selection, const std::string& out_path) {
  const BandSelection sel = BandSelection::parse(selection);
  PnmDepth depth = PnmDepth::eight_bit;
  const ImageBuffer g = read_pnm_file(g_path, &depth);
  const ImageBuffer r = read_pnm_file(r_path);
  const ImageBuffer re = read_pnm_file(re_path);
  const ImageBuffer nir = read_pnm_file(nir_path);
  const ImageBuffer composed = compose_bands(g, r, re, nir, sel);
  write_pnm_file(out_path, composed, depth);
  std::cout << "composed " << sel.to_string() << " -> " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agridet: anchors, pyramid forward graph, detection post-processing,\n"
               "pixel-wise evaluation, and dataset tooling for crop-stress detection"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a key=value config file");

  int jobs = 1;
  app.add_option("--jobs", jobs, "Parallelism degree for per-image work")
      ->envname("AGRIDET_JOBS")
      ->check(CLI::PositiveNumber);

  std::string classes_spec;
  app.add_option("--class-map", classes_spec,
                 "Class name=id pairs, comma separated (default healthy=0,stressed=1)");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a dataset directory");
  std::string validate_root;
  std::string validate_out;
  validate->add_option("root", validate_root, "Dataset directory")->required();
  validate->add_option("--out", validate_out, "Write the report to a file");

  // augment
  auto* augment = app.add_subcommand("augment", "Materialize the photometric augmentations");
  std::string augment_manifest, augment_out_dir;
  AugmentSpec augment_spec;
  augment->add_option("--manifest", augment_manifest, "Training-split manifest file")
      ->required();
  augment->add_option("--out-dir", augment_out_dir, "Output directory")->required();
  augment->add_option("--seed", augment_spec.seed, "Noise seed");
  augment->add_option("--rescale-lo", augment_spec.rescale_lo, "Lower percentile");
  augment->add_option("--rescale-hi", augment_spec.rescale_hi, "Upper percentile");
  augment->add_option("--gamma", augment_spec.gamma, "Gamma exponent");
  augment->add_option("--gamma-gain", augment_spec.gamma_gain, "Gamma gain");
  augment->add_option("--sigmoid-cutoff", augment_spec.sigmoid_cutoff, "Sigmoid cutoff");
  augment->add_option("--sigmoid-gain", augment_spec.sigmoid_gain, "Sigmoid gain");
  augment->add_option("--noise-std", augment_spec.noise_std, "Noise standard deviation");

  // anchors
  auto* anchors = app.add_subcommand("anchors", "Summarize the anchor pyramid");
  AnchorConfig anchor_cfg;
  int anchor_width = 672, anchor_height = 672;
  std::string anchors_dump, anchors_out;
  anchors->add_option("--width", anchor_width, "Input width");
  anchors->add_option("--height", anchor_height, "Input height");
  anchors->add_option("--strides", anchor_cfg.level_strides, "Per-level strides");
  anchors->add_option("--sizes", anchor_cfg.level_sizes, "Per-level anchor sizes");
  anchors->add_option("--ratios", anchor_cfg.ratios, "Width/height ratios");
  anchors->add_option("--dump", anchors_dump, "Write the full anchor table");
  anchors->add_option("--out", anchors_out, "Write the summary to a file");

  // postprocess
  auto* postprocess = app.add_subcommand("postprocess",
                                         "Score-filter and suppress a detections table");
  std::string post_in, post_out;
  double post_score = 0.7, post_iou = 0.3;
  bool post_agnostic = false;
  postprocess->add_option("--in", post_in, "Raw detections table")->required();
  postprocess->add_option("--out", post_out, "Filtered detections table")->required();
  postprocess->add_option("--score-threshold", post_score,
                          "Keep boxes with scores strictly greater");
  postprocess->add_option("--nms-iou", post_iou, "Suppress overlap greater than this IoU");
  postprocess->add_flag("--class-agnostic", post_agnostic,
                        "Let boxes of different classes suppress each other");

  // eval
  auto* eval = app.add_subcommand("eval", "Pixel-wise evaluation of detections");
  std::string eval_dataset, eval_detections, eval_out;
  bool eval_per_image = false, eval_per_image_mean = false;
  eval->add_option("--dataset", eval_dataset, "Dataset directory or manifest file")
      ->required();
  eval->add_option("--detections", eval_detections, "Detections table")->required();
  eval->add_flag("--per-image", eval_per_image, "Also print per-image counts");
  eval->add_flag("--per-image-mean", eval_per_image_mean,
                 "Average metrics per image instead of pooling pixel counts");
  eval->add_option("--out", eval_out, "Write the report to a file");

  // forward-check
  auto* forward = app.add_subcommand("forward-check", "Run the forward graph and verify shapes");
  int fwd_size = 672, fwd_depth = 4, fwd_fault = 0;
  std::uint64_t fwd_seed = 0;
  std::string fwd_out;
  forward->add_option("--size", fwd_size, "Square input size (multiple of 32)");
  forward->add_option("--seed", fwd_seed, "Weight/input seed");
  forward->add_option("--depth", fwd_depth, "Head tower depth")->check(CLI::NonNegativeNumber);
  forward->add_option("--fault-lateral", fwd_fault,
                      "Inject a channel fault into the lateral conv of level 2..5");
  forward->add_option("--out", fwd_out, "Write the shape trace to a file");

  // overlay
  auto* overlay = app.add_subcommand("overlay", "Draw detection boxes onto an image");
  std::string ov_image, ov_dets, ov_out, ov_id;
  overlay->add_option("--image", ov_image, "Input image (ppm/pgm)")->required();
  overlay->add_option("--detections", ov_dets, "Detections table")->required();
  overlay->add_option("--image-id", ov_id, "Row filter (default: image file stem)");
  overlay->add_option("--out", ov_out, "Output overlay image")->required();

  // compose-bands
  auto* compose = app.add_subcommand("compose-bands",
                                     "Stack three spectral bands into a 3-channel image");
  std::string cb_g, cb_r, cb_re, cb_nir, cb_sel = "R-G-NIR", cb_out;
  compose->add_option("--g", cb_g, "Green band image")->required();
  compose->add_option("--r", cb_r, "Red band image")->required();
  compose->add_option("--re", cb_re, "Red-edge band image")->required();
  compose->add_option("--nir", cb_nir, "Near-infrared band image")->required();
  compose->add_option("--select", cb_sel, "Band order, e.g. R-G-NIR");
  compose->add_option("--out", cb_out, "Output image")->required();

  try {
    app.parse(argc, argv);

    if (validate->parsed()) return cmd_validate(validate_root, classes_spec, validate_out);
    if (augment->parsed()) {
      augment_spec.validate();
      return cmd_augment(augment_manifest, augment_out_dir, augment_spec, jobs);
    }
    if (anchors->parsed()) {
      anchor_cfg.input_size = {anchor_width, anchor_height};
      return cmd_anchors(anchor_cfg, anchors_dump, anchors_out);
    }
    if (postprocess->parsed()) {
      if (post_score < 0.0 || post_score > 1.0 || post_iou < 0.0 || post_iou > 1.0) {
        throw ConfigError("thresholds must lie in [0,1]");
      }
      return cmd_postprocess(post_in, post_out, post_score, post_iou, post_agnostic,
                             classes_spec);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_dataset, eval_detections, eval_per_image, eval_per_image_mean,
                      classes_spec, eval_out);
    }
    if (forward->parsed()) {
      return cmd_forward_check(fwd_size, fwd_seed, fwd_depth, fwd_fault, fwd_out);
    }
    if (overlay->parsed()) return cmd_overlay(ov_image, ov_dets, ov_id, ov_out, classes_spec);
    if (compose->parsed()) {
      return cmd_compose_bands(cb_g, cb_r, cb_re, cb_nir, cb_sel, cb_out);
    }
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    // CLI11 help/version exits are not errors.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const InvalidInputError& e) {
    std::cerr << "invariant error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
