#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "det3d/augment.hpp"
#include "det3d/evalmetrics.hpp"
#include "det3d/fusion.hpp"
#include "det3d/geom.hpp"
#include "det3d/pointcloud.hpp"
#include "det3d/types.hpp"

namespace det3d::io {

/// Malformed input data (binary offset or JSONL line named in the message).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (unknown key, bad value, missing weight...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- point-cloud binary ----------------------------------------------------
// Layout: magic "PCF1", little-endian u32 point_count, u32 channels_per_point
// (>= 3, counting x, y, z), then point_count * channels f32 values row-major.

pointcloud::PointCloud read_pcf(const std::filesystem::path& path);
void write_pcf(const std::filesystem::path& path,
               const pointcloud::PointCloud& cloud);

// --- JSON Lines interchange -------------------------------------------------

struct DetectionRecord {
  std::string frame_id;
  Detection det;
  /// Full per-class probabilities, when the producer provided them.
  std::optional<std::vector<double>> class_probs;
};

struct GtRecord {
  std::string frame_id;
  GroundTruthObject object;
};

std::vector<DetectionRecord> read_detections_jsonl(
    const std::filesystem::path& path);
void write_detections_jsonl(const std::filesystem::path& path,
                            const std::vector<DetectionRecord>& records);

std::vector<GtRecord> read_gts_jsonl(const std::filesystem::path& path);
void write_gts_jsonl(const std::filesystem::path& path,
                     const std::vector<GtRecord>& records);

std::vector<augment::ObjectDbEntry> read_object_db_jsonl(
    const std::filesystem::path& path);
void write_object_db_jsonl(const std::filesystem::path& path,
                           const std::vector<augment::ObjectDbEntry>& entries);

std::map<std::string, std::vector<Detection>> group_detections_by_frame(
    const std::vector<DetectionRecord>& records);
std::map<std::string, std::vector<GroundTruthObject>> group_gts_by_frame(
    const std::vector<GtRecord>& records);

// --- configuration -----------------------------------------------------------

struct PipelineConfig {
  std::uint64_t seed = 0;
  pointcloud::VoxelGridSpec voxel;
  std::vector<double> tta_yaws;
  std::vector<double> tta_scales;
  std::vector<double> tta_z_offsets;
  struct Assign {
    geom::IouKind iou_kind = geom::IouKind::k3D;
    int top_m = 512;
    double score_threshold = 0.1;
  } assign;
  struct Fusion {
    std::string method = "wbf";  // or "nms"
    double nms_iou_threshold = 0.7;
    double wbf_iou_threshold = 0.55;
    std::size_t max_boxes = 500;
    geom::IouKind iou_kind = geom::IouKind::kBev;
  } fusion;
  det3d::fusion::EnsembleConfig ensemble;
  evalmetrics::MatchConfig eval;
  struct GtPaste {
    std::map<int, int> counts;
    int total_epochs = 20;
    int fade_last = 5;
    bool resample_pose = false;
  } gtpaste;

  PipelineConfig();

  std::vector<augment::TtaTransform> tta_transforms() const;
};

/// Parses and validates a config document. Unknown keys are rejected with
/// the offending key named in the error.
PipelineConfig parse_pipeline_config(const nlohmann::json& doc);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// The fully resolved configuration, suitable for re-running a command.
nlohmann::json config_to_json(const PipelineConfig& config);

// --- digests & manifest -------------------------------------------------------

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::uint64_t seed = 0;
  std::string config_digest;
  nlohmann::json resolved_config;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  std::string wall_clock_utc;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
void write_manifest(const std::filesystem::path& path,
                    const RunManifest& manifest);

}  // namespace det3d::io
