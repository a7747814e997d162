#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "det3d/io.hpp"

namespace fs = std::filesystem;
using det3d::Detection;
using det3d::GroundTruthObject;
using det3d::geom::Box3D;
using det3d::io::ConfigError;
using det3d::io::FormatError;
using det3d::pointcloud::Point;
using det3d::pointcloud::PointCloud;

namespace {

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "det3d_io_tests";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("pcf round trip preserves f32-exact values") {
  PointCloud cloud;
  cloud.feature_dim = 2;
  cloud.frame_id = "whatever";
  for (int i = 0; i < 50; ++i) {
    Point p;
    p.x = 0.25 * i;
    p.y = -0.5 * i;
    p.z = 0.125 * i;
    p.extra = {1.0 * i, 0.5};
    cloud.points.push_back(p);
  }
  const fs::path path = test_dir() / "roundtrip.pcf";
  det3d::io::write_pcf(path, cloud);
  const PointCloud back = det3d::io::read_pcf(path);
  REQUIRE(back.points.size() == cloud.points.size());
  CHECK(back.feature_dim == 2);
  CHECK(back.frame_id == "roundtrip");  // frame id comes from the file stem
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK(back.points[i].x == cloud.points[i].x);
    CHECK(back.points[i].y == cloud.points[i].y);
    CHECK(back.points[i].z == cloud.points[i].z);
    CHECK(back.points[i].extra == cloud.points[i].extra);
  }
}

TEST_CASE("pcf reader rejects malformed files with byte offsets") {
  const fs::path dir = test_dir();

  write_text(dir / "magic.pcf", "NOPE");
  CHECK_THROWS_WITH_AS(det3d::io::read_pcf(dir / "magic.pcf"),
                       doctest::Contains("byte 0"), FormatError);

  write_text(dir / "header.pcf", "PCF1\x01\x00");
  CHECK_THROWS_WITH_AS(det3d::io::read_pcf(dir / "header.pcf"),
                       doctest::Contains("truncated header"), FormatError);

  // channels_per_point below 3
  std::string bad_channels = "PCF1";
  bad_channels += std::string("\x01\x00\x00\x00", 4);
  bad_channels += std::string("\x02\x00\x00\x00", 4);
  write_text(dir / "channels.pcf", bad_channels);
  CHECK_THROWS_WITH_AS(det3d::io::read_pcf(dir / "channels.pcf"),
                       doctest::Contains("channels_per_point"), FormatError);

  // count says 2 points but only one is present
  PointCloud one;
  one.feature_dim = 0;
  one.points.push_back(Point{1, 2, 3, {}});
  det3d::io::write_pcf(dir / "short.pcf", one);
  std::string bytes = slurp(dir / "short.pcf");
  bytes[4] = 2;  // bump point_count
  write_text(dir / "short.pcf", bytes);
  CHECK_THROWS_WITH_AS(det3d::io::read_pcf(dir / "short.pcf"),
                       doctest::Contains("truncated point data"), FormatError);
}

TEST_CASE("detections jsonl round trip") {
  std::vector<det3d::io::DetectionRecord> records;
  det3d::io::DetectionRecord rec;
  rec.frame_id = "frame_3";
  rec.det = Detection{Box3D(1, 2, 0.5, 4, 2, 1.5, 0.25), 1, 0.75, "modelA"};
  rec.class_probs = std::vector<double>{0.1, 0.75};
  records.push_back(rec);
  rec.frame_id = "frame_4";
  rec.det.model_id.clear();
  rec.class_probs.reset();
  records.push_back(rec);

  const fs::path path = test_dir() / "dets.jsonl";
  det3d::io::write_detections_jsonl(path, records);
  const auto back = det3d::io::read_detections_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].frame_id == "frame_3");
  CHECK(back[0].det.model_id == "modelA");
  CHECK(back[0].det.score == 0.75);
  CHECK(back[0].det.box.cx == 1.0);
  CHECK(back[0].det.box.yaw == 0.25);
  REQUIRE(back[0].class_probs.has_value());
  CHECK((*back[0].class_probs)[1] == 0.75);
  CHECK(back[1].det.model_id.empty());
  CHECK_FALSE(back[1].class_probs.has_value());
}

TEST_CASE("jsonl errors carry line numbers") {
  const fs::path dir = test_dir();

  write_text(dir / "bad.jsonl",
             R"({"frame_id":"a","class_id":0,"score":0.5,"box":[0,0,0,1,1,1,0]})"
             "\nnot json\n");
  CHECK_THROWS_WITH_AS(det3d::io::read_detections_jsonl(dir / "bad.jsonl"),
                       doctest::Contains("line 2"), FormatError);

  write_text(dir / "score.jsonl",
             R"({"frame_id":"a","class_id":0,"score":1.5,"box":[0,0,0,1,1,1,0]})"
             "\n");
  CHECK_THROWS_WITH_AS(det3d::io::read_detections_jsonl(dir / "score.jsonl"),
                       doctest::Contains("score"), FormatError);

  write_text(dir / "box.jsonl",
             R"({"frame_id":"a","class_id":0,"score":0.5,"box":[0,0,0,1,1,1]})"
             "\n");
  CHECK_THROWS_WITH_AS(det3d::io::read_detections_jsonl(dir / "box.jsonl"),
                       doctest::Contains("7"), FormatError);

  // Non-positive extent is a data error, reported with its line.
  write_text(dir / "extent.jsonl",
             R"({"frame_id":"a","class_id":0,"score":0.5,"box":[0,0,0,0,1,1,0]})"
             "\n");
  CHECK_THROWS_WITH_AS(det3d::io::read_detections_jsonl(dir / "extent.jsonl"),
                       doctest::Contains("line 1"), FormatError);
}

TEST_CASE("gts jsonl: integer frame ids are normalized to strings") {
  const fs::path path = test_dir() / "gts.jsonl";
  write_text(path, R"({"frame_id":17,"class_id":2,"box":[0,0,0,1,1,1,0]})"
                   "\n");
  const auto records = det3d::io::read_gts_jsonl(path);
  REQUIRE(records.size() == 1);
  CHECK(records[0].frame_id == "17");
  CHECK(records[0].object.class_id == 2);
}

TEST_CASE("object db jsonl round trip") {
  std::vector<det3d::augment::ObjectDbEntry> db(1);
  db[0].class_id = 1;
  db[0].box = Box3D(5, -2, 0.5, 4, 2, 1.5, 0.6);
  db[0].points.feature_dim = 1;
  db[0].points.points.push_back(Point{0.5, 0.25, -0.125, {0.75}});
  db[0].points.points.push_back(Point{-0.5, 0.5, 0.25, {0.5}});

  const fs::path path = test_dir() / "db.jsonl";
  det3d::io::write_object_db_jsonl(path, db);
  const auto back = det3d::io::read_object_db_jsonl(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].class_id == 1);
  CHECK(back[0].box.cx == 5.0);
  REQUIRE(back[0].points.points.size() == 2);
  CHECK(back[0].points.feature_dim == 1);
  CHECK(back[0].points.points[0].extra[0] == 0.75);
}

TEST_CASE("pipeline config: defaults and overrides") {
  const det3d::io::PipelineConfig defaults;
  CHECK(defaults.voxel.x_min == -75.2);
  CHECK(defaults.tta_transforms().size() == 16);
  CHECK(defaults.assign.top_m == 512);
  CHECK(defaults.fusion.max_boxes == 500);
  CHECK(defaults.eval.threshold_for(0) == 0.7);
  CHECK(defaults.eval.threshold_for(1) == 0.5);

  const auto parsed = det3d::io::parse_pipeline_config(nlohmann::json::parse(R"({
    "seed": 9,
    "tta": {"yaws": [0.0], "scales": [1.0], "z_offsets": [0.0]},
    "fusion": {"wbf_iou_threshold": 0.4},
    "ensemble": {"classes": {"0": {"a": 1.0, "b": 0.5}}},
    "eval": {"iou_thresholds": {"2": 0.6}}
  })"));
  CHECK(parsed.seed == 9);
  CHECK(parsed.tta_transforms().size() == 1);
  CHECK(parsed.fusion.wbf_iou_threshold == 0.4);
  CHECK(parsed.fusion.nms_iou_threshold == 0.7);  // untouched default
  CHECK(parsed.ensemble.class_model_weights.at(0).at("b") == 0.5);
  CHECK(parsed.eval.threshold_for(2) == 0.6);
  CHECK(parsed.eval.threshold_for(0) == 0.5);  // replaced map falls back
}

TEST_CASE("pipeline config rejects unknown keys by name") {
  CHECK_THROWS_WITH_AS(
      det3d::io::parse_pipeline_config(nlohmann::json::parse(R"({"sead": 1})")),
      doctest::Contains("sead"), ConfigError);
  CHECK_THROWS_WITH_AS(det3d::io::parse_pipeline_config(
                           nlohmann::json::parse(R"({"voxel": {"sizex": 1}})")),
                       doctest::Contains("voxel.sizex"), ConfigError);
  CHECK_THROWS_WITH_AS(det3d::io::parse_pipeline_config(
                           nlohmann::json::parse(R"({"tta": {"scales": [0]}})")),
                       doctest::Contains("tta.scales"), ConfigError);
  CHECK_THROWS_AS(det3d::io::parse_pipeline_config(
                      nlohmann::json::parse(R"({"voxel": {"x_max": -80}})")),
                  ConfigError);
}

TEST_CASE("config serialization round trips") {
  det3d::io::PipelineConfig config;
  config.seed = 1234;
  config.tta_yaws = {0.0, 0.5};
  config.ensemble.class_model_weights[0]["m"] = 0.75;
  config.eval.iou_thresholds[3] = 0.65;
  config.gtpaste.counts[1] = 4;

  const auto doc = det3d::io::config_to_json(config);
  const auto back = det3d::io::parse_pipeline_config(doc);
  CHECK(back.seed == 1234);
  CHECK(back.tta_yaws == config.tta_yaws);
  CHECK(back.ensemble.class_model_weights.at(0).at("m") == 0.75);
  CHECK(back.eval.iou_thresholds.at(3) == 0.65);
  CHECK(back.gtpaste.counts.at(1) == 4);
  CHECK(det3d::io::config_to_json(back) == doc);
}

TEST_CASE("sha256 known answer") {
  CHECK(det3d::io::sha256_hex(std::string("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(det3d::io::sha256_hex(std::string{}) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
