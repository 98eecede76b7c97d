// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "agridet/errors.hpp"
#include "agridet/xml.hpp"

namespace agridet {

namespace {

// Shortest decimal form that parses back to the same double; integral
// values print without a fractional part, matching common label tools.
std::string format_coord(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_number(const XmlNode& node, const char* context) {
  const char* begin = node.text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << context << ": non-numeric <" << node.name << "> value '" << node.text
        << "' (line " << node.line << ")";
    throw ParseError(msg.str());
  }
  return value;
}

bool has_extension(const std::filesystem::path& p, std::initializer_list<const char*> exts) {
  const std::string e = p.extension().string();
  return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

}  // namespace

ClassMap::ClassMap() : entries_{{"healthy", kClassHealthy}, {"stressed", kClassStressed}} {}

ClassMap::ClassMap(std::vector<std::pair<std::string, int>> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("class map: at least one class required");
  std::set<std::string> names;
  std::set<int> ids;
  for (const auto& [name, id] : entries_) {
    if (!names.insert(name).second) throw ConfigError("class map: duplicate name '" + name + "'");
    if (!ids.insert(id).second) throw ConfigError("class map: duplicate id");
  }
}

std::optional<int> ClassMap::find(std::string_view name) const {
  for (const auto& [n, id] : entries_) {
    if (n == name) return id;
  }
  return std::nullopt;
}

int ClassMap::id(std::string_view name) const {
  if (const auto found = find(name)) return *found;
  std::ostringstream msg;
  msg << "unknown class name '" << name << "' (declared:";
  for (const auto& [n, _] : entries_) msg << " " << n;
  msg << ")";
  throw ParseError(msg.str());
}

const std::string& ClassMap::name(int class_id) const {
  for (const auto& [n, id] : entries_) {
    if (id == class_id) return n;
  }
  throw InvalidInputError("unknown class id " + std::to_string(class_id));
}

std::vector<int> ClassMap::ids() const {
  std::vector<int> out;
  for (const auto& [_, id] : entries_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> ClassMap::names_by_id() const {
  std::vector<std::string> out;
  for (int id : ids()) out.push_back(name(id));
  return out;
}

Annotation parse_annotation(std::string_view xml_text, const ClassMap& classes) {
  const XmlNode root = xml_parse(xml_text);
  if (root.name != "annotation") {
    throw ParseError("expected <annotation> root, found <" + root.name + "> (line " +
                     std::to_string(root.line) + ")");
  }
  Annotation out;
  out.filename = root.require("filename").text;
  const XmlNode& size = root.require("size");
  out.width = static_cast<int>(parse_number(size.require("width"), "size"));
  out.height = static_cast<int>(parse_number(size.require("height"), "size"));
  out.depth = static_cast<int>(parse_number(size.require("depth"), "size"));
  if (out.width < 1 || out.height < 1) {
    throw ParseError("size: image dimensions must be positive (line " +
                     std::to_string(size.line) + ")");
  }

  for (const XmlNode& child : root.children) {
    if (child.name != "object") continue;
    const XmlNode& name = child.require("name");
    const XmlNode& bndbox = child.require("bndbox");
    const std::string context = "object '" + name.text + "' bndbox";
    Box box;
    box.xmin = parse_number(bndbox.require("xmin"), context.c_str());
    box.ymin = parse_number(bndbox.require("ymin"), context.c_str());
    box.xmax = parse_number(bndbox.require("xmax"), context.c_str());
    box.ymax = parse_number(bndbox.require("ymax"), context.c_str());
    if (box.xmin >= box.xmax || box.ymin >= box.ymax) {
      std::ostringstream msg;
      msg << context << ": inverted or empty coordinates (" << box.xmin << "," << box.ymin
          << "," << box.xmax << "," << box.ymax << ") at line " << bndbox.line;
      throw ParseError(msg.str());
    }
    if (box.xmin < 0 || box.ymin < 0 || box.xmax > out.width || box.ymax > out.height) {
      std::ostringstream msg;
      msg << context << ": box exceeds image bounds " << out.width << "x" << out.height
          << " at line " << bndbox.line;
      throw ParseError(msg.str());
    }
    LabeledBox lb;
    lb.box = box;
    if (const auto id = classes.find(name.text)) {
      lb.class_id = *id;
    } else {
      std::ostringstream msg;
      msg << "object: unknown class name '" << name.text << "' at line " << name.line;
      throw ParseError(msg.str());
    }
    out.objects.push_back(lb);
  }
  return out;
}

std::string write_annotation(const Annotation& annotation, const ClassMap& classes) {
  std::ostringstream os;
  os << "<annotation>\n";
  os << "  <filename>" << xml_escape(annotation.filename) << "</filename>\n";
  os << "  <size>\n";
  os << "    <width>" << annotation.width << "</width>\n";
  os << "    <height>" << annotation.height << "</height>\n";
  os << "    <depth>" << annotation.depth << "</depth>\n";
  os << "  </size>\n";
  for (const LabeledBox& lb : annotation.objects) {
    os << "  <object>\n";
    os << "    <name>" << xml_escape(classes.name(lb.class_id)) << "</name>\n";
    os << "    <bndbox>\n";
    os << "      <xmin>" << format_coord(lb.box.xmin) << "</xmin>\n";
    os << "      <ymin>" << format_coord(lb.box.ymin) << "</ymin>\n";
    os << "      <xmax>" << format_coord(lb.box.xmax) << "</xmax>\n";
    os << "      <ymax>" << format_coord(lb.box.ymax) << "</ymax>\n";
    os << "    </bndbox>\n";
    os << "  </object>\n";
  }
  os << "</annotation>\n";
  return os.str();
}

Annotation read_annotation_file(const std::filesystem::path& path, const ClassMap& classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_annotation(buffer.str(), classes);
  } catch (const ParseError& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
}

void write_annotation_file(const std::filesystem::path& path, const Annotation& annotation,
                           const ClassMap& classes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create annotation file " + path.string());
  out << write_annotation(annotation, classes);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetManifest scan_dataset(const std::filesystem::path& root, ScanReport* report,
                             std::string split, ClassMap classes) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) {
    throw IoError("dataset root " + root.string() + " is not a readable directory");
  }
  std::map<std::string, std::filesystem::path> images;
  std::map<std::string, std::filesystem::path> annotations;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::filesystem::path& p = entry.path();
    const std::string stem = p.stem().string();
    if (has_extension(p, {".ppm", ".pgm"})) {
      images[stem] = p;
    } else if (has_extension(p, {".xml"})) {
      annotations[stem] = p;
    }
  }

  DatasetManifest manifest;
  manifest.split = std::move(split);
  manifest.classes = std::move(classes);
  for (const auto& [stem, image] : images) {
    const auto ann = annotations.find(stem);
    if (ann == annotations.end()) {
      if (report) report->warnings.push_back("image without annotation: " + image.string());
      continue;
    }
    manifest.entries.push_back({image, ann->second});
  }
  for (const auto& [stem, ann] : annotations) {
    if (!images.count(stem) && report) {
      report->warnings.push_back("annotation without image: " + ann.string());
    }
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  DatasetManifest manifest;
  std::vector<std::pair<std::string, int>> class_entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = rstrip(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string directive;
    fields >> directive;
    if (directive == "split") {
      fields >> manifest.split;
    } else if (directive == "class") {
      std::string name;
      int id = 0;
      if (!(fields >> name >> id)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed class directive");
      }
      class_entries.emplace_back(name, id);
    } else if (directive == "pair") {
      std::string image, annotation;
      if (!(fields >> image >> annotation)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": pair directive needs an image and an annotation path");
      }
      manifest.entries.push_back({resolve(image), resolve(annotation)});
    } else {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": unknown directive '" + directive + "'");
    }
  }
  if (!class_entries.empty()) manifest.classes = ClassMap(std::move(class_entries));
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create manifest " + path.string());
  out << "# agridet-manifest v1\n";
  out << "split " << manifest.split << "\n";
  for (const auto& [name, id] : manifest.classes.entries()) {
    out << "class " << name << " " << id << "\n";
  }
  const std::filesystem::path base = path.parent_path();
  for (const ManifestEntry& entry : manifest.entries) {
    const auto rel_image = entry.image.lexically_proximate(base);
    const auto rel_ann = entry.annotation.lexically_proximate(base);
    out << "pair " << rel_image.generic_string() << " " << rel_ann.generic_string() << "\n";
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<DetectionRecord> read_detections(std::istream& in, const ClassMap& classes) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("detections: empty input, header expected");
  ++line_no;
  if (rstrip(line) != "image_id\tclass\tscore\txmin\tymin\txmax\tymax") {
    throw ParseError("detections:1: bad header '" + rstrip(line) + "'");
  }

  std::vector<DetectionRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    line = rstrip(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line, '\t');
    if (fields.size() != 7) {
      throw ParseError("detections:" + std::to_string(line_no) + ": expected 7 fields, got " +
                       std::to_string(fields.size()));
    }
    DetectionRecord rec;
    rec.image_id = fields[0];
    if (const auto id = classes.find(fields[1])) {
      rec.class_id = *id;
    } else {
      throw ParseError("detections:" + std::to_string(line_no) + ": unknown class '" +
                       fields[1] + "'");
    }
    double numbers[5];
    for (int i = 0; i < 5; ++i) {
      const std::string& f = fields[2 + i];
      char* end = nullptr;
      numbers[i] = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0' || !std::isfinite(numbers[i])) {
        throw ParseError("detections:" + std::to_string(line_no) + ": non-numeric field '" +
                         f + "'");
      }
    }
    rec.score = numbers[0];
    rec.box = {numbers[1], numbers[2], numbers[3], numbers[4]};
    if (rec.score < 0.0 || rec.score > 1.0) {
      throw ParseError("detections:" + std::to_string(line_no) + ": score outside [0,1]");
    }
    if (!rec.box.valid()) {
      throw ParseError("detections:" + std::to_string(line_no) + ": degenerate box");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<DetectionRecord> read_detections_file(const std::filesystem::path& path,
                                                  const ClassMap& classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detections file " + path.string());
  try {
    return read_detections(in, classes);
  } catch (const ParseError& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
}

void write_detections(std::ostream& out, std::span<const DetectionRecord> records,
                      const ClassMap& classes) {
  out << "image_id\tclass\tscore\txmin\tymin\txmax\tymax\n";
  for (const DetectionRecord& rec : records) {
    out << rec.image_id << "\t" << classes.name(rec.class_id) << "\t"
        << format_coord(rec.score) << "\t" << format_coord(rec.box.xmin) << "\t"
        << format_coord(rec.box.ymin) << "\t" << format_coord(rec.box.xmax) << "\t"
        << format_coord(rec.box.ymax) << "\n";
  }
}

void write_detections_file(const std::filesystem::path& path,
                           std::span<const DetectionRecord> records, const ClassMap& classes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create detections file " + path.string());
  write_detections(out, records, classes);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

struct Rotation {
  // Exact entries for right angles; cos/sin otherwise.
  double c = 1.0;
  double s = 0.0;
};

Rotation rotation_for(int degrees) {
  switch (degrees) {
    case 0: return {1.0, 0.0};
    case 90: return {0.0, 1.0};
    case 45: return {std::sqrt(0.5), std::sqrt(0.5)};
    case 135: return {-std::sqrt(0.5), std::sqrt(0.5)};
    default:
      throw InvalidInputError("extract_patch: rotation must be one of 0, 45, 90, 135");
  }
}

// Bilinear sample at continuous position (x, y) in pixel-center
// coordinates; taps with (near-)zero weight are skipped so exact grid hits
// never touch neighbours. Border fringe clamps to the edge pixel.
double sample_bilinear(const ImageBuffer& img, double x, double y, int channel) {
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const double jf = std::floor(fx);
  const double if_ = std::floor(fy);
  const double wx = fx - jf;
  const double wy = fy - if_;
  const int j0 = static_cast<int>(jf);
  const int i0 = static_cast<int>(if_);

  double value = 0.0;
  for (int di = 0; di < 2; ++di) {
    const double w_row = di == 0 ? 1.0 - wy : wy;
    if (w_row <= 1e-12) continue;
    const int i = std::clamp(i0 + di, 0, img.height() - 1);
    for (int dj = 0; dj < 2; ++dj) {
      const double w = w_row * (dj == 0 ? 1.0 - wx : wx);
      if (w <= 1e-12) continue;
      const int j = std::clamp(j0 + dj, 0, img.width() - 1);
      value += w * img.at(i, j, channel);
    }
  }
  return value;
}

}  // namespace

Patch extract_patch(const ImageBuffer& img, const Annotation& ann, double center_x,
                    double center_y, int size, int rotation_deg) {
  if (img.empty()) throw InvalidInputError("extract_patch: empty image");
  if (size < 1) throw InvalidInputError("extract_patch: size must be >= 1");
  const Rotation rot = rotation_for(rotation_deg);

  const double half = 0.5 * size;
  // Window corners in the rotated frame, mapped back into the source image
  // (inverse rotation). The sample grid is inside their convex hull, so
  // corner containment implies every sample is valid.
  const double corners[4][2] = {{center_x - half, center_y - half},
                                {center_x + half, center_y - half},
                                {center_x - half, center_y + half},
                                {center_x + half, center_y + half}};
  for (const auto& corner : corners) {
    const double dx = corner[0] - center_x;
    const double dy = corner[1] - center_y;
    // R(-theta) = [c s; -s c]
    const double sx = center_x + rot.c * dx + rot.s * dy;
    const double sy = center_y - rot.s * dx + rot.c * dy;
    constexpr double tol = 1e-9;
    if (sx < -tol || sx > img.width() + tol || sy < -tol || sy > img.height() + tol) {
      std::ostringstream msg;
      msg << "extract_patch: rotated window leaves the image (corner maps to " << sx << ","
          << sy << " outside " << img.width() << "x" << img.height() << ")";
      throw InvalidInputError(msg.str());
    }
  }

  Patch patch;
  patch.image = ImageBuffer(size, size, img.channels());
  const double origin_x = center_x - half;
  const double origin_y = center_y - half;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double qx = origin_x + j + 0.5;
      const double qy = origin_y + i + 0.5;
      const double dx = qx - center_x;
      const double dy = qy - center_y;
      const double sx = center_x + rot.c * dx + rot.s * dy;
      const double sy = center_y - rot.s * dx + rot.c * dy;
      for (int c = 0; c < img.channels(); ++c) {
        patch.image.at(i, j, c) = sample_bilinear(img, sx, sy, c);
      }
    }
  }

  patch.annotation.filename = ann.filename;
  patch.annotation.width = size;
  patch.annotation.height = size;
  patch.annotation.depth = img.channels();
  for (const LabeledBox& lb : ann.objects) {
    // Forward-rotate the box corners, take the axis-aligned hull in patch
    // coordinates, clip, and apply the area-retention rule.
    const double bx[4] = {lb.box.xmin, lb.box.xmax, lb.box.xmin, lb.box.xmax};
    const double by[4] = {lb.box.ymin, lb.box.ymin, lb.box.ymax, lb.box.ymax};
    double hull_xmin = 0, hull_xmax = 0, hull_ymin = 0, hull_ymax = 0;
    for (int k = 0; k < 4; ++k) {
      const double dx = bx[k] - center_x;
      const double dy = by[k] - center_y;
      const double rx = center_x + rot.c * dx - rot.s * dy - origin_x;
      const double ry = center_y + rot.s * dx + rot.c * dy - origin_y;
      if (k == 0) {
        hull_xmin = hull_xmax = rx;
        hull_ymin = hull_ymax = ry;
      } else {
        hull_xmin = std::min(hull_xmin, rx);
        hull_xmax = std::max(hull_xmax, rx);
        hull_ymin = std::min(hull_ymin, ry);
        hull_ymax = std::max(hull_ymax, ry);
      }
    }
    Box clipped{std::clamp(hull_xmin, 0.0, static_cast<double>(size)),
                std::clamp(hull_ymin, 0.0, static_cast<double>(size)),
                std::clamp(hull_xmax, 0.0, static_cast<double>(size)),
                std::clamp(hull_ymax, 0.0, static_cast<double>(size))};
    if (!clipped.valid()) continue;
    if (clipped.area() < 0.25 * lb.box.area()) continue;
    patch.annotation.objects.push_back({clipped, lb.class_id, std::nullopt});
  }
  return patch;
}

}  // namespace agridet
