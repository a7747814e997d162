#include "det3d/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace det3d::io {

namespace {

using nlohmann::json;

[[noreturn]] void format_fail(const std::filesystem::path& path,
                              const std::string& what) {
  throw FormatError(path.string() + ": " + what);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) format_fail(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = read_u32_le(p);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void append_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  append_u32_le(out, bits);
}

std::string frame_id_from_json(const json& line, const std::filesystem::path& path,
                               std::size_t line_no) {
  if (!line.contains("frame_id")) {
    format_fail(path, "line " + std::to_string(line_no) + ": missing frame_id");
  }
  const json& v = line.at("frame_id");
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  format_fail(path, "line " + std::to_string(line_no) +
                        ": frame_id must be a string or integer");
}

geom::Box3D box_from_json(const json& arr, const std::filesystem::path& path,
                          std::size_t line_no) {
  if (!arr.is_array() || arr.size() != 7) {
    format_fail(path, "line " + std::to_string(line_no) +
                          ": box must be an array of 7 numbers");
  }
  double v[7];
  for (std::size_t i = 0; i < 7; ++i) {
    if (!arr[i].is_number()) {
      format_fail(path, "line " + std::to_string(line_no) +
                            ": box entries must be numbers");
    }
    v[i] = arr[i].get<double>();
  }
  try {
    return geom::Box3D(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  } catch (const std::invalid_argument& e) {
    format_fail(path, "line " + std::to_string(line_no) + ": " + e.what());
  }
}

json box_to_json(const geom::Box3D& box) {
  return json::array({box.cx, box.cy, box.cz, box.length, box.width, box.height,
                      box.yaw});
}

json parse_jsonl_line(const std::string& text, const std::filesystem::path& path,
                      std::size_t line_no) {
  json line = json::parse(text, nullptr, false);
  if (line.is_discarded()) {
    format_fail(path, "line " + std::to_string(line_no) + ": invalid JSON");
  }
  if (!line.is_object()) {
    format_fail(path, "line " + std::to_string(line_no) + ": expected an object");
  }
  return line;
}

template <typename Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) format_fail(path, "cannot open file");
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    fn(parse_jsonl_line(text, path, line_no), line_no);
  }
}

void require_keys(const json& obj, std::initializer_list<const char*> known,
                  const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError("unknown config key: " +
                        (scope.empty() ? key : scope + "." + key));
    }
  }
}

double require_number(const json& obj, const char* key, double fallback,
                      const std::string& scope) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ConfigError("config key " + scope + "." + key + " must be a number");
  }
  return obj.at(key).get<double>();
}

geom::IouKind iou_kind_from_string(const std::string& s, const std::string& scope) {
  if (s == "bev") return geom::IouKind::kBev;
  if (s == "3d") return geom::IouKind::k3D;
  throw ConfigError("config key " + scope + " must be \"bev\" or \"3d\"");
}

std::string iou_kind_to_string(geom::IouKind kind) {
  return kind == geom::IouKind::kBev ? "bev" : "3d";
}

std::vector<double> number_list(const json& arr, const std::string& scope) {
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("config key " + scope + " must be a non-empty array");
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) {
      throw ConfigError("config key " + scope + " must hold numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

int class_id_from_key(const std::string& key, const std::string& scope) {
  try {
    std::size_t pos = 0;
    const int id = std::stoi(key, &pos);
    if (pos != key.size()) throw std::invalid_argument(key);
    return id;
  } catch (const std::exception&) {
    throw ConfigError("config key " + scope + " has non-integer class id '" +
                      key + "'");
  }
}

}  // namespace

// --- point-cloud binary -------------------------------------------------------

pointcloud::PointCloud read_pcf(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(data, "PCF1", 4) != 0) {
    format_fail(path, "bad magic at byte 0 (expected \"PCF1\")");
  }
  if (bytes.size() < 12) {
    format_fail(path, "truncated header at byte " + std::to_string(bytes.size()));
  }
  const std::uint32_t count = read_u32_le(data + 4);
  const std::uint32_t channels = read_u32_le(data + 8);
  if (channels < 3) {
    format_fail(path, "channels_per_point must be >= 3 (got " +
                          std::to_string(channels) + ") at byte 8");
  }
  const std::size_t expected =
      12 + static_cast<std::size_t>(count) * channels * 4;
  if (bytes.size() < expected) {
    format_fail(path, "truncated point data at byte " +
                          std::to_string(bytes.size()) + " (expected " +
                          std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) {
    format_fail(path, "trailing bytes at byte " + std::to_string(expected));
  }

  pointcloud::PointCloud cloud;
  cloud.feature_dim = static_cast<int>(channels) - 3;
  cloud.frame_id = path.stem().string();
  cloud.points.resize(count);
  const unsigned char* p = data + 12;
  for (std::uint32_t i = 0; i < count; ++i) {
    pointcloud::Point& pt = cloud.points[i];
    pt.x = read_f32_le(p);
    pt.y = read_f32_le(p + 4);
    pt.z = read_f32_le(p + 8);
    pt.extra.resize(cloud.feature_dim);
    for (int c = 0; c < cloud.feature_dim; ++c) {
      pt.extra[c] = read_f32_le(p + 12 + 4 * c);
    }
    p += 4 * channels;
  }
  return cloud;
}

void write_pcf(const std::filesystem::path& path,
               const pointcloud::PointCloud& cloud) {
  cloud.validate();
  std::string out;
  const std::uint32_t channels = 3 + static_cast<std::uint32_t>(cloud.feature_dim);
  out.reserve(12 + cloud.points.size() * channels * 4);
  out.append("PCF1");
  append_u32_le(out, static_cast<std::uint32_t>(cloud.points.size()));
  append_u32_le(out, channels);
  for (const auto& p : cloud.points) {
    append_f32_le(out, static_cast<float>(p.x));
    append_f32_le(out, static_cast<float>(p.y));
    append_f32_le(out, static_cast<float>(p.z));
    for (double e : p.extra) append_f32_le(out, static_cast<float>(e));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) format_fail(path, "cannot open file for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) format_fail(path, "write failed");
}

// --- JSON Lines ----------------------------------------------------------------

std::vector<DetectionRecord> read_detections_jsonl(
    const std::filesystem::path& path) {
  std::vector<DetectionRecord> records;
  for_each_jsonl_line(path, [&](const json& line, std::size_t line_no) {
    DetectionRecord rec;
    rec.frame_id = frame_id_from_json(line, path, line_no);
    if (!line.contains("class_id") || !line.at("class_id").is_number_integer()) {
      format_fail(path,
                  "line " + std::to_string(line_no) + ": missing integer class_id");
    }
    rec.det.class_id = line.at("class_id").get<int>();
    if (!line.contains("score") || !line.at("score").is_number()) {
      format_fail(path, "line " + std::to_string(line_no) + ": missing score");
    }
    rec.det.score = line.at("score").get<double>();
    if (!(rec.det.score >= 0.0 && rec.det.score <= 1.0)) {
      format_fail(path,
                  "line " + std::to_string(line_no) + ": score outside [0, 1]");
    }
    if (!line.contains("box")) {
      format_fail(path, "line " + std::to_string(line_no) + ": missing box");
    }
    rec.det.box = box_from_json(line.at("box"), path, line_no);
    if (line.contains("model_id")) {
      if (!line.at("model_id").is_string()) {
        format_fail(path,
                    "line " + std::to_string(line_no) + ": model_id must be a string");
      }
      rec.det.model_id = line.at("model_id").get<std::string>();
    }
    if (line.contains("class_probs")) {
      const json& probs = line.at("class_probs");
      if (!probs.is_array() || probs.empty()) {
        format_fail(path, "line " + std::to_string(line_no) +
                              ": class_probs must be a non-empty array");
      }
      std::vector<double> values;
      values.reserve(probs.size());
      for (const auto& v : probs) {
        if (!v.is_number()) {
          format_fail(path, "line " + std::to_string(line_no) +
                                ": class_probs entries must be numbers");
        }
        values.push_back(v.get<double>());
      }
      rec.class_probs = std::move(values);
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void write_detections_jsonl(const std::filesystem::path& path,
                            const std::vector<DetectionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) format_fail(path, "cannot open file for writing");
  for (const auto& rec : records) {
    json line;
    line["frame_id"] = rec.frame_id;
    line["class_id"] = rec.det.class_id;
    line["score"] = rec.det.score;
    line["box"] = box_to_json(rec.det.box);
    if (!rec.det.model_id.empty()) line["model_id"] = rec.det.model_id;
    if (rec.class_probs) line["class_probs"] = *rec.class_probs;
    out << line.dump() << '\n';
  }
  if (!out) format_fail(path, "write failed");
}

std::vector<GtRecord> read_gts_jsonl(const std::filesystem::path& path) {
  std::vector<GtRecord> records;
  for_each_jsonl_line(path, [&](const json& line, std::size_t line_no) {
    GtRecord rec;
    rec.frame_id = frame_id_from_json(line, path, line_no);
    if (!line.contains("class_id") || !line.at("class_id").is_number_integer()) {
      format_fail(path,
                  "line " + std::to_string(line_no) + ": missing integer class_id");
    }
    rec.object.class_id = line.at("class_id").get<int>();
    if (!line.contains("box")) {
      format_fail(path, "line " + std::to_string(line_no) + ": missing box");
    }
    rec.object.box = box_from_json(line.at("box"), path, line_no);
    records.push_back(std::move(rec));
  });
  return records;
}

void write_gts_jsonl(const std::filesystem::path& path,
                     const std::vector<GtRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) format_fail(path, "cannot open file for writing");
  for (const auto& rec : records) {
    json line;
    line["frame_id"] = rec.frame_id;
    line["class_id"] = rec.object.class_id;
    line["box"] = box_to_json(rec.object.box);
    out << line.dump() << '\n';
  }
  if (!out) format_fail(path, "write failed");
}

std::vector<augment::ObjectDbEntry> read_object_db_jsonl(
    const std::filesystem::path& path) {
  std::vector<augment::ObjectDbEntry> entries;
  for_each_jsonl_line(path, [&](const json& line, std::size_t line_no) {
    augment::ObjectDbEntry entry;
    if (!line.contains("class_id") || !line.at("class_id").is_number_integer()) {
      format_fail(path,
                  "line " + std::to_string(line_no) + ": missing integer class_id");
    }
    entry.class_id = line.at("class_id").get<int>();
    if (!line.contains("box")) {
      format_fail(path, "line " + std::to_string(line_no) + ": missing box");
    }
    entry.box = box_from_json(line.at("box"), path, line_no);
    if (!line.contains("points") || !line.at("points").is_array()) {
      format_fail(path,
                  "line " + std::to_string(line_no) + ": missing points array");
    }
    int feature_dim = -1;
    for (const auto& row : line.at("points")) {
      if (!row.is_array() || row.size() < 3) {
        format_fail(path, "line " + std::to_string(line_no) +
                              ": each point needs at least x, y, z");
      }
      pointcloud::Point p;
      p.x = row[0].get<double>();
      p.y = row[1].get<double>();
      p.z = row[2].get<double>();
      for (std::size_t c = 3; c < row.size(); ++c) {
        p.extra.push_back(row[c].get<double>());
      }
      const int dim = static_cast<int>(p.extra.size());
      if (feature_dim < 0) feature_dim = dim;
      if (dim != feature_dim) {
        format_fail(path, "line " + std::to_string(line_no) +
                              ": inconsistent point channel counts");
      }
      entry.points.points.push_back(std::move(p));
    }
    entry.points.feature_dim = feature_dim < 0 ? 0 : feature_dim;
    entries.push_back(std::move(entry));
  });
  return entries;
}

void write_object_db_jsonl(const std::filesystem::path& path,
                           const std::vector<augment::ObjectDbEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) format_fail(path, "cannot open file for writing");
  for (const auto& entry : entries) {
    json points = json::array();
    for (const auto& p : entry.points.points) {
      json row = json::array({p.x, p.y, p.z});
      for (double e : p.extra) row.push_back(e);
      points.push_back(std::move(row));
    }
    json line;
    line["class_id"] = entry.class_id;
    line["box"] = box_to_json(entry.box);
    line["points"] = std::move(points);
    out << line.dump() << '\n';
  }
  if (!out) format_fail(path, "write failed");
}

std::map<std::string, std::vector<Detection>> group_detections_by_frame(
    const std::vector<DetectionRecord>& records) {
  std::map<std::string, std::vector<Detection>> grouped;
  for (const auto& rec : records) grouped[rec.frame_id].push_back(rec.det);
  return grouped;
}

std::map<std::string, std::vector<GroundTruthObject>> group_gts_by_frame(
    const std::vector<GtRecord>& records) {
  std::map<std::string, std::vector<GroundTruthObject>> grouped;
  for (const auto& rec : records) grouped[rec.frame_id].push_back(rec.object);
  return grouped;
}

// --- configuration ----------------------------------------------------------------

PipelineConfig::PipelineConfig() {
  constexpr double pi = 3.14159265358979323846;
  tta_yaws = {0.0, -0.13 * pi, -0.07 * pi, 0.07 * pi};
  tta_scales = {0.95, 1.05};
  tta_z_offsets = {-0.2, 0.2};
}

std::vector<augment::TtaTransform> PipelineConfig::tta_transforms() const {
  return augment::tta_set(tta_yaws, tta_scales, tta_z_offsets);
}

PipelineConfig parse_pipeline_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig config;
  require_keys(doc, {"seed", "voxel", "tta", "assign", "fusion", "ensemble",
                     "eval", "gtpaste"},
               "");

  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer()) {
      throw ConfigError("config key seed must be an integer");
    }
    config.seed = doc.at("seed").get<std::uint64_t>();
  }

  if (doc.contains("voxel")) {
    const json& v = doc.at("voxel");
    require_keys(v, {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max",
                     "size_x", "size_y", "size_z"},
                 "voxel");
    auto& spec = config.voxel;
    spec.x_min = require_number(v, "x_min", spec.x_min, "voxel");
    spec.x_max = require_number(v, "x_max", spec.x_max, "voxel");
    spec.y_min = require_number(v, "y_min", spec.y_min, "voxel");
    spec.y_max = require_number(v, "y_max", spec.y_max, "voxel");
    spec.z_min = require_number(v, "z_min", spec.z_min, "voxel");
    spec.z_max = require_number(v, "z_max", spec.z_max, "voxel");
    spec.size_x = require_number(v, "size_x", spec.size_x, "voxel");
    spec.size_y = require_number(v, "size_y", spec.size_y, "voxel");
    spec.size_z = require_number(v, "size_z", spec.size_z, "voxel");
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key voxel: ") + e.what());
    }
  }

  if (doc.contains("tta")) {
    const json& t = doc.at("tta");
    require_keys(t, {"yaws", "scales", "z_offsets"}, "tta");
    if (t.contains("yaws")) config.tta_yaws = number_list(t.at("yaws"), "tta.yaws");
    if (t.contains("scales")) {
      config.tta_scales = number_list(t.at("scales"), "tta.scales");
    }
    if (t.contains("z_offsets")) {
      config.tta_z_offsets = number_list(t.at("z_offsets"), "tta.z_offsets");
    }
    for (double s : config.tta_scales) {
      if (s <= 0.0) throw ConfigError("config key tta.scales must be positive");
    }
  }

  if (doc.contains("assign")) {
    const json& a = doc.at("assign");
    require_keys(a, {"iou", "top_m", "score_threshold"}, "assign");
    if (a.contains("iou")) {
      config.assign.iou_kind =
          iou_kind_from_string(a.at("iou").get<std::string>(), "assign.iou");
    }
    config.assign.top_m = static_cast<int>(
        require_number(a, "top_m", config.assign.top_m, "assign"));
    if (config.assign.top_m < 1) {
      throw ConfigError("config key assign.top_m must be >= 1");
    }
    config.assign.score_threshold = require_number(
        a, "score_threshold", config.assign.score_threshold, "assign");
  }

  if (doc.contains("fusion")) {
    const json& f = doc.at("fusion");
    require_keys(f, {"method", "nms_iou_threshold", "wbf_iou_threshold",
                     "max_boxes", "iou"},
                 "fusion");
    if (f.contains("method")) {
      config.fusion.method = f.at("method").get<std::string>();
      if (config.fusion.method != "wbf" && config.fusion.method != "nms") {
        throw ConfigError("config key fusion.method must be \"wbf\" or \"nms\"");
      }
    }
    config.fusion.nms_iou_threshold = require_number(
        f, "nms_iou_threshold", config.fusion.nms_iou_threshold, "fusion");
    config.fusion.wbf_iou_threshold = require_number(
        f, "wbf_iou_threshold", config.fusion.wbf_iou_threshold, "fusion");
    config.fusion.max_boxes = static_cast<std::size_t>(require_number(
        f, "max_boxes", static_cast<double>(config.fusion.max_boxes), "fusion"));
    if (f.contains("iou")) {
      config.fusion.iou_kind =
          iou_kind_from_string(f.at("iou").get<std::string>(), "fusion.iou");
    }
  }

  if (doc.contains("ensemble")) {
    const json& e = doc.at("ensemble");
    require_keys(e, {"classes", "iou_match_threshold", "max_boxes"}, "ensemble");
    if (e.contains("classes")) {
      if (!e.at("classes").is_object()) {
        throw ConfigError("config key ensemble.classes must be an object");
      }
      for (const auto& [class_key, weights] : e.at("classes").items()) {
        const int class_id = class_id_from_key(class_key, "ensemble.classes");
        if (!weights.is_object()) {
          throw ConfigError("config key ensemble.classes." + class_key +
                            " must map model ids to weights");
        }
        for (const auto& [model, w] : weights.items()) {
          if (!w.is_number()) {
            throw ConfigError("config key ensemble.classes." + class_key + "." +
                              model + " must be a number");
          }
          config.ensemble.class_model_weights[class_id][model] = w.get<double>();
        }
      }
    }
    config.ensemble.iou_match_threshold =
        require_number(e, "iou_match_threshold",
                       config.ensemble.iou_match_threshold, "ensemble");
    config.ensemble.max_boxes = static_cast<std::size_t>(
        require_number(e, "max_boxes",
                       static_cast<double>(config.ensemble.max_boxes), "ensemble"));
    try {
      config.ensemble.validate();
    } catch (const std::invalid_argument& err) {
      throw ConfigError(std::string("config key ensemble: ") + err.what());
    }
  }

  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    require_keys(e, {"iou", "iou_thresholds", "default_iou_threshold"}, "eval");
    if (e.contains("iou")) {
      config.eval.iou_kind =
          iou_kind_from_string(e.at("iou").get<std::string>(), "eval.iou");
    }
    if (e.contains("iou_thresholds")) {
      if (!e.at("iou_thresholds").is_object()) {
        throw ConfigError("config key eval.iou_thresholds must be an object");
      }
      config.eval.iou_thresholds.clear();
      for (const auto& [class_key, value] : e.at("iou_thresholds").items()) {
        const int class_id = class_id_from_key(class_key, "eval.iou_thresholds");
        if (!value.is_number()) {
          throw ConfigError("config key eval.iou_thresholds." + class_key +
                            " must be a number");
        }
        config.eval.iou_thresholds[class_id] = value.get<double>();
      }
    }
    config.eval.default_iou_threshold = require_number(
        e, "default_iou_threshold", config.eval.default_iou_threshold, "eval");
  }

  if (doc.contains("gtpaste")) {
    const json& g = doc.at("gtpaste");
    require_keys(g, {"counts", "total_epochs", "fade_last", "resample_pose"},
                 "gtpaste");
    if (g.contains("counts")) {
      if (!g.at("counts").is_object()) {
        throw ConfigError("config key gtpaste.counts must be an object");
      }
      for (const auto& [class_key, value] : g.at("counts").items()) {
        const int class_id = class_id_from_key(class_key, "gtpaste.counts");
        if (!value.is_number_integer()) {
          throw ConfigError("config key gtpaste.counts." + class_key +
                            " must be an integer");
        }
        config.gtpaste.counts[class_id] = value.get<int>();
      }
    }
    config.gtpaste.total_epochs = static_cast<int>(require_number(
        g, "total_epochs", config.gtpaste.total_epochs, "gtpaste"));
    config.gtpaste.fade_last = static_cast<int>(
        require_number(g, "fade_last", config.gtpaste.fade_last, "gtpaste"));
    if (g.contains("resample_pose")) {
      if (!g.at("resample_pose").is_boolean()) {
        throw ConfigError("config key gtpaste.resample_pose must be a boolean");
      }
      config.gtpaste.resample_pose = g.at("resample_pose").get<bool>();
    }
    if (config.gtpaste.fade_last < 0 ||
        config.gtpaste.fade_last > config.gtpaste.total_epochs) {
      throw ConfigError(
          "config key gtpaste: need 0 <= fade_last <= total_epochs");
    }
  }
  return config;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw ConfigError(path.string() + ": invalid JSON");
  }
  return parse_pipeline_config(doc);
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  json doc;
  doc["seed"] = config.seed;
  doc["voxel"] = {{"x_min", config.voxel.x_min}, {"x_max", config.voxel.x_max},
                  {"y_min", config.voxel.y_min}, {"y_max", config.voxel.y_max},
                  {"z_min", config.voxel.z_min}, {"z_max", config.voxel.z_max},
                  {"size_x", config.voxel.size_x},
                  {"size_y", config.voxel.size_y},
                  {"size_z", config.voxel.size_z}};
  doc["tta"] = {{"yaws", config.tta_yaws},
                {"scales", config.tta_scales},
                {"z_offsets", config.tta_z_offsets}};
  doc["assign"] = {{"iou", iou_kind_to_string(config.assign.iou_kind)},
                   {"top_m", config.assign.top_m},
                   {"score_threshold", config.assign.score_threshold}};
  doc["fusion"] = {{"method", config.fusion.method},
                   {"nms_iou_threshold", config.fusion.nms_iou_threshold},
                   {"wbf_iou_threshold", config.fusion.wbf_iou_threshold},
                   {"max_boxes", config.fusion.max_boxes},
                   {"iou", iou_kind_to_string(config.fusion.iou_kind)}};
  json classes = json::object();
  for (const auto& [class_id, weights] : config.ensemble.class_model_weights) {
    json models = json::object();
    for (const auto& [model, w] : weights) models[model] = w;
    classes[std::to_string(class_id)] = std::move(models);
  }
  doc["ensemble"] = {{"classes", std::move(classes)},
                     {"iou_match_threshold", config.ensemble.iou_match_threshold},
                     {"max_boxes", config.ensemble.max_boxes}};
  json thresholds = json::object();
  for (const auto& [class_id, value] : config.eval.iou_thresholds) {
    thresholds[std::to_string(class_id)] = value;
  }
  doc["eval"] = {{"iou", iou_kind_to_string(config.eval.iou_kind)},
                 {"iou_thresholds", std::move(thresholds)},
                 {"default_iou_threshold", config.eval.default_iou_threshold}};
  json counts = json::object();
  for (const auto& [class_id, count] : config.gtpaste.counts) {
    counts[std::to_string(class_id)] = count;
  }
  doc["gtpaste"] = {{"counts", std::move(counts)},
                    {"total_epochs", config.gtpaste.total_epochs},
                    {"fade_last", config.gtpaste.fade_last},
                    {"resample_pose", config.gtpaste.resample_pose}};
  return doc;
}

// --- digests & manifest ---------------------------------------------------------

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(data, size, digest, &digest_len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(const std::string& data) {
  return sha256_hex(data.data(), data.size());
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_file_bytes(path));
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  json doc;
  doc["tool_version"] = manifest.tool_version;
  doc["command"] = manifest.command;
  doc["seed"] = manifest.seed;
  doc["config_digest"] = manifest.config_digest;
  doc["resolved_config"] = manifest.resolved_config;
  doc["input_digests"] = manifest.input_digests;
  doc["output_digests"] = manifest.output_digests;
  doc["wall_clock_utc"] = manifest.wall_clock_utc;
  return doc;
}

void write_manifest(const std::filesystem::path& path,
                    const RunManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) format_fail(path, "cannot open file for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) format_fail(path, "write failed");
}

}  // namespace det3d::io
