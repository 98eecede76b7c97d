// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agridet/geometry.hpp"
#include "agridet/image.hpp"

namespace agridet {

/// Bidirectional class-name <-> id mapping. Defaults to healthy=0,
/// stressed=1; datasets with different label strings supply their own map.
class ClassMap {
 public:
  ClassMap();  // default classes
  explicit ClassMap(std::vector<std::pair<std::string, int>> entries);

  std::optional<int> find(std::string_view name) const;
  int id(std::string_view name) const;        // throws ParseError on unknown names
  const std::string& name(int class_id) const;  // throws InvalidInputError on unknown ids
  std::vector<int> ids() const;               // ascending
  std::vector<std::string> names_by_id() const;
  std::size_t size() const { return entries_.size(); }
  std::span<const std::pair<std::string, int>> entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, int>> entries_;
};

/// Parsed label file: one image, its dimensions, and the object boxes.
struct Annotation {
  std::string filename;
  int width = 0;
  int height = 0;
  int depth = 3;
  std::vector<LabeledBox> objects;  // scores unset
};

/// Parse a label document (annotation -> size{width,height,depth};
/// repeated object -> {name, bndbox{xmin,ymin,xmax,ymax}}). Throws
/// ParseError with line/element context on malformed markup, missing
/// elements, non-numeric or inverted coordinates, out-of-image boxes, and
/// unknown class names.
Annotation parse_annotation(std::string_view xml_text, const ClassMap& classes);

/// Inverse of parse_annotation; parse(write(a)) == a and a second write of
/// the parsed value is byte-identical.
std::string write_annotation(const Annotation& annotation, const ClassMap& classes);

Annotation read_annotation_file(const std::filesystem::path& path, const ClassMap& classes);
void write_annotation_file(const std::filesystem::path& path, const Annotation& annotation,
                           const ClassMap& classes);

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path annotation;
};

struct DatasetManifest {
  std::string split = "train";
  ClassMap classes;
  std::vector<ManifestEntry> entries;
};

struct ScanReport {
  std::vector<std::string> warnings;  // unpaired files and similar
};

/// Pair image (.ppm/.pgm) and annotation (.xml) files by basename in one
/// directory, in lexicographic order. Unpaired files are reported, not
/// fatal. Throws IoError when root is not a readable directory.
DatasetManifest scan_dataset(const std::filesystem::path& root, ScanReport* report = nullptr,
                             std::string split = "train", ClassMap classes = ClassMap());

/// Manifest file: line-oriented, '#' comments; directives
///   split <name>
///   class <name> <id>
///   pair <image path> <annotation path>
/// Relative paths are resolved against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// One row of the detections interchange table.
struct DetectionRecord {
  std::string image_id;
  int class_id = 0;
  double score = 0.0;
  Box box;
};

/// Tab-separated detections table with the fixed header
///   image_id  class  score  xmin  ymin  xmax  ymax
/// Throws ParseError with 1-based line numbers on malformed rows.
std::vector<DetectionRecord> read_detections(std::istream& in, const ClassMap& classes);
std::vector<DetectionRecord> read_detections_file(const std::filesystem::path& path,
                                                  const ClassMap& classes);
void write_detections(std::ostream& out, std::span<const DetectionRecord> records,
                      const ClassMap& classes);
void write_detections_file(const std::filesystem::path& path,
                           std::span<const DetectionRecord> records, const ClassMap& classes);

struct Patch {
  ImageBuffer image;
  Annotation annotation;
};

/// Rotate the image about `center` by rotation_deg (0, 45, 90, or 135,
/// measured from +x toward +y) and crop the size x size window centered
/// there. Right-angle rotations with aligned grids reproduce pixels
/// exactly; other angles sample bilinearly. Annotation boxes are mapped by
/// rotating their corners and taking the axis-aligned hull, clipped to the
/// patch; a box keeping less than 25% of its original area is dropped.
/// Throws InvalidInputError when the rotated window leaves the source
/// image.
Patch extract_patch(const ImageBuffer& img, const Annotation& ann, double center_x,
                    double center_y, int size, int rotation_deg);

}  // namespace agridet
