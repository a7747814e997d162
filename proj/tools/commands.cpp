#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "det3d/assign.hpp"
#include "det3d/io.hpp"
#include "det3d/log.hpp"
#include "det3d/parallel.hpp"
#include "det3d/version.hpp"

namespace det3d::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Resolves config + seed and accumulates digests for the manifest.
struct Run {
  io::PipelineConfig config;
  io::RunManifest manifest;
  fs::path manifest_path;

  Run(const CommonOptions& common, const std::string& command_name) {
    if (!common.config_path.empty()) {
      config = io::load_pipeline_config(common.config_path);
    }
    if (common.seed) config.seed = *common.seed;

    manifest.tool_version = kVersion;
    manifest.command = command_name;
    for (const std::string& a : common.argv) manifest.command += " " + a;
    manifest.seed = config.seed;
    manifest.resolved_config = io::config_to_json(config);
    manifest.config_digest = io::sha256_hex(manifest.resolved_config.dump());
    if (!common.manifest_path.empty()) {
      manifest_path = common.manifest_path;
    } else if (!common.output.empty()) {
      manifest_path = common.output + ".manifest.json";
    } else {
      manifest_path = "det3d.manifest.json";
    }
  }

  void add_input(const fs::path& path) {
    manifest.input_digests[path.string()] = io::sha256_file(path);
  }
  void add_output(const fs::path& path) {
    manifest.output_digests[path.string()] = io::sha256_file(path);
  }
  void finish() {
    manifest.wall_clock_utc = utc_now();
    io::write_manifest(manifest_path, manifest);
    log::debug("manifest written to " + manifest_path.string());
  }
};

std::string pattern_with_index(const std::string& pattern, std::size_t index) {
  const std::size_t pos = pattern.find("{}");
  if (pos == std::string::npos) {
    throw io::ConfigError("--dets-pattern must contain \"{}\"");
  }
  std::string out = pattern;
  out.replace(pos, 2, std::to_string(index));
  return out;
}

// Frame keys in sorted order, for deterministic output grouping.
template <typename Map>
std::vector<std::string> sorted_keys(const Map& m) {
  std::vector<std::string> keys;
  keys.reserve(m.size());
  for (const auto& [key, value] : m) keys.push_back(key);
  return keys;
}

void append_frame_detections(std::vector<io::DetectionRecord>& out,
                             const std::string& frame_id,
                             const std::vector<Detection>& dets) {
  for (const Detection& det : dets) {
    io::DetectionRecord rec;
    rec.frame_id = frame_id;
    rec.det = det;
    rec.det.model_id.clear();
    out.push_back(std::move(rec));
  }
}

// Per-class fusion of one frame's pool, classes ascending, score descending
// within each class.
std::vector<Detection> fuse_frame(const std::vector<Detection>& pooled,
                                  const io::PipelineConfig& config,
                                  const std::string& method) {
  std::vector<Detection> fused;
  for (const auto& [class_id, dets] : fusion::partition_by_class(pooled)) {
    std::vector<Detection> result;
    if (method == "nms") {
      result = fusion::nms(dets, config.fusion.nms_iou_threshold);
    } else {
      fusion::WbfConfig wbf_config;
      wbf_config.iou_match_threshold = config.fusion.wbf_iou_threshold;
      wbf_config.max_boxes = config.fusion.max_boxes;
      wbf_config.match_iou = config.fusion.iou_kind;
      result = fusion::wbf(dets, wbf_config);
    }
    fused.insert(fused.end(), result.begin(), result.end());
  }
  return fused;
}

}  // namespace

int cmd_voxelize(const CommonOptions& common, const VoxelizeOptions& opts) {
  Run run(common, "voxelize");
  run.add_input(opts.input);

  const pointcloud::PointCloud cloud = io::read_pcf(opts.input);
  const auto grid = pointcloud::voxelize(cloud, run.config.voxel);
  const auto dims = run.config.voxel.dims();

  std::uint64_t in_range = 0;
  for (const auto& [key, cell] : grid.cells) in_range += cell.count;
  const double total_cells = static_cast<double>(dims[0]) *
                             static_cast<double>(dims[1]) *
                             static_cast<double>(dims[2]);
  const double occupancy =
      total_cells > 0.0 ? static_cast<double>(grid.cells.size()) / total_cells : 0.0;

  std::cout << "voxels: dims " << dims[0] << " x " << dims[1] << " x " << dims[2]
            << ", occupied " << grid.cells.size() << ", occupancy " << occupancy
            << ", points " << in_range << "/" << cloud.points.size()
            << " in range\n";

  if (!common.output.empty()) {
    json summary;
    summary["dims"] = {dims[0], dims[1], dims[2]};
    summary["occupied_cells"] = grid.cells.size();
    summary["occupancy"] = occupancy;
    summary["points_in_range"] = in_range;
    summary["points_total"] = cloud.points.size();
    std::ofstream out(common.output, std::ios::trunc);
    if (!out) throw io::FormatError(common.output + ": cannot open for writing");
    out << summary.dump(2) << '\n';
    run.add_output(common.output);
  }

  if (!opts.dump_cells.empty()) {
    std::vector<std::uint64_t> keys;
    keys.reserve(grid.cells.size());
    for (const auto& [key, cell] : grid.cells) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    std::ofstream out(opts.dump_cells, std::ios::trunc);
    if (!out) throw io::FormatError(opts.dump_cells + ": cannot open for writing");
    for (std::uint64_t key : keys) {
      const auto& cell = grid.cells.at(key);
      const auto idx = grid.unpack(key);
      json line;
      line["index"] = {idx[0], idx[1], idx[2]};
      line["count"] = cell.count;
      line["mean"] = cell.mean;
      out << line.dump() << '\n';
    }
    run.add_output(opts.dump_cells);
  }

  run.finish();
  return 0;
}

int cmd_tta(const CommonOptions& common, const TtaOptions& opts) {
  Run run(common, "tta");
  const auto transforms = run.config.tta_transforms();

  if (!opts.expand_cloud.empty()) {
    run.add_input(opts.expand_cloud);
    const auto cloud = io::read_pcf(opts.expand_cloud);
    const fs::path dir = common.output;
    fs::create_directories(dir);
    for (std::size_t k = 0; k < transforms.size(); ++k) {
      auto variant = augment::apply_to_cloud(transforms[k], cloud);
      const fs::path path = dir / ("variant_" + std::to_string(k) + ".pcf");
      io::write_pcf(path, variant);
      run.add_output(path);
    }
    log::info("wrote " + std::to_string(transforms.size()) + " variant clouds");
    run.finish();
    return 0;
  }

  // Fusion mode: inverse-map every variant's boxes, pool per frame, fuse.
  std::map<std::string, std::vector<Detection>> pooled;
  for (std::size_t k = 0; k < transforms.size(); ++k) {
    const std::string path = pattern_with_index(opts.dets_pattern, k);
    if (!fs::exists(path)) {
      throw io::FormatError("variant " + std::to_string(k) +
                            " detection file missing: " + path);
    }
    run.add_input(path);
    for (const auto& rec : io::read_detections_jsonl(path)) {
      Detection det = rec.det;
      det.box = augment::inverse_to_box(transforms[k], det.box);
      pooled[rec.frame_id].push_back(std::move(det));
    }
  }

  const auto frames = sorted_keys(pooled);
  const auto fused_per_frame =
      parallel_map(frames.size(), common.jobs, [&](std::size_t i) {
        return fuse_frame(pooled.at(frames[i]), run.config, "wbf");
      });

  std::vector<io::DetectionRecord> records;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    append_frame_detections(records, frames[i], fused_per_frame[i]);
  }
  io::write_detections_jsonl(common.output, records);
  run.add_output(common.output);
  run.finish();
  return 0;
}

int cmd_assign(const CommonOptions& common, const AssignOptions& opts) {
  Run run(common, "assign");
  run.add_input(opts.gts);
  run.add_input(opts.candidates);

  const auto gt_records = io::read_gts_jsonl(opts.gts);
  const auto cand_records = io::read_detections_jsonl(opts.candidates);
  const auto gts_by_frame = io::group_gts_by_frame(gt_records);

  std::map<std::string, std::vector<io::DetectionRecord>> cands_by_frame;
  for (const auto& rec : cand_records) cands_by_frame[rec.frame_id].push_back(rec);

  const auto frames = sorted_keys(cands_by_frame);
  const auto assignments =
      parallel_map(frames.size(), common.jobs, [&](std::size_t i) {
        const auto& cands = cands_by_frame.at(frames[i]);
        const auto gt_it = gts_by_frame.find(frames[i]);
        std::vector<int> result(cands.size(), assign::kBackground);
        if (gt_it == gts_by_frame.end() || gt_it->second.empty()) return result;
        const auto& gts = gt_it->second;

        // Costs are computed over the top_m highest-scoring candidates;
        // anything past the cap stays background.
        std::vector<std::size_t> keep(cands.size());
        std::iota(keep.begin(), keep.end(), 0);
        std::stable_sort(keep.begin(), keep.end(),
                         [&](std::size_t a, std::size_t b) {
                           return cands[a].det.score > cands[b].det.score;
                         });
        if (keep.size() > static_cast<std::size_t>(run.config.assign.top_m)) {
          keep.resize(static_cast<std::size_t>(run.config.assign.top_m));
        }
        std::sort(keep.begin(), keep.end());

        // Class-prob vectors: taken from the file when present, else
        // one-hot at class_id scaled by the score.
        int num_classes = 0;
        for (const auto& g : gts) num_classes = std::max(num_classes, g.class_id + 1);
        for (const auto& c : cands) {
          num_classes = std::max(num_classes, c.det.class_id + 1);
        }
        std::vector<assign::Candidate> candidates;
        std::vector<geom::Box3D> boxes;
        candidates.reserve(keep.size());
        for (std::size_t idx : keep) {
          const auto& rec = cands[idx];
          assign::Candidate cand;
          cand.box = rec.det.box;
          if (rec.class_probs) {
            if (static_cast<int>(rec.class_probs->size()) < num_classes) {
              throw io::FormatError(
                  opts.candidates + ": class_probs shorter than class count in frame " +
                  frames[i]);
            }
            cand.class_probs = *rec.class_probs;
          } else {
            cand.class_probs.assign(num_classes, 0.0);
            cand.class_probs[rec.det.class_id] = rec.det.score;
          }
          boxes.push_back(cand.box);
          candidates.push_back(std::move(cand));
        }

        const auto budgets =
            assign::dynamic_budgets(gts, boxes, run.config.assign.iou_kind);
        const auto cost = assign::build_cost_matrix(gts, candidates);
        const auto assigned = assign::ota_assign(cost, budgets).candidate_to_gt;
        for (std::size_t k = 0; k < keep.size(); ++k) {
          result[keep[k]] = assigned[k];
        }
        return result;
      });

  std::ofstream out(common.output, std::ios::trunc);
  if (!out) throw io::FormatError(common.output + ": cannot open for writing");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = 0; j < assignments[i].size(); ++j) {
      json line;
      line["frame_id"] = frames[i];
      line["candidate"] = j;
      line["gt"] = assignments[i][j];
      out << line.dump() << '\n';
    }
  }
  out.close();
  run.add_output(common.output);
  run.finish();
  return 0;
}

int cmd_fuse(const CommonOptions& common, const FuseOptions& opts) {
  Run run(common, "fuse");
  run.add_input(opts.dets);
  const std::string method =
      opts.method.empty() ? run.config.fusion.method : opts.method;
  if (method != "wbf" && method != "nms") {
    throw io::ConfigError("fuse method must be \"wbf\" or \"nms\"");
  }

  const auto grouped =
      io::group_detections_by_frame(io::read_detections_jsonl(opts.dets));
  const auto frames = sorted_keys(grouped);
  const auto fused_per_frame =
      parallel_map(frames.size(), common.jobs, [&](std::size_t i) {
        return fuse_frame(grouped.at(frames[i]), run.config, method);
      });

  std::vector<io::DetectionRecord> records;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    append_frame_detections(records, frames[i], fused_per_frame[i]);
  }
  io::write_detections_jsonl(common.output, records);
  run.add_output(common.output);
  run.finish();
  return 0;
}

int cmd_ensemble(const CommonOptions& common, const EnsembleOptions& opts) {
  Run run(common, "ensemble");
  if (run.config.ensemble.class_model_weights.empty()) {
    throw io::ConfigError("ensemble requires class weights in the config");
  }

  std::map<std::string, std::map<std::string, std::vector<Detection>>> frames_models;
  for (const std::string& spec : opts.inputs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
      throw io::ConfigError("--input must look like model=path, got '" + spec + "'");
    }
    const std::string model = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    run.add_input(path);
    for (const auto& rec : io::read_detections_jsonl(path)) {
      frames_models[rec.frame_id][model].push_back(rec.det);
    }
  }

  const auto frames = sorted_keys(frames_models);
  const auto fused_per_frame =
      parallel_map(frames.size(), common.jobs, [&](std::size_t i) {
        return fusion::ensemble_fuse(frames_models.at(frames[i]),
                                     run.config.ensemble);
      });

  std::vector<io::DetectionRecord> records;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    append_frame_detections(records, frames[i], fused_per_frame[i]);
  }
  io::write_detections_jsonl(common.output, records);
  run.add_output(common.output);
  run.finish();
  return 0;
}

int cmd_eval(const CommonOptions& common, const EvalOptions& opts) {
  Run run(common, "eval");
  run.add_input(opts.dets);
  run.add_input(opts.gts);

  const auto dets =
      io::group_detections_by_frame(io::read_detections_jsonl(opts.dets));
  const auto gt_records = io::read_gts_jsonl(opts.gts);
  const auto gts = io::group_gts_by_frame(gt_records);

  const auto result = evalmetrics::evaluate(dets, gts, run.config.eval);

  std::map<int, std::size_t> gt_counts;
  for (const auto& rec : gt_records) ++gt_counts[rec.object.class_id];

  json per_class = json::object();
  for (const auto& [class_id, ap] : result.ap) {
    json entry;
    entry["ap"] = ap;
    entry["aph"] = result.aph.at(class_id);
    entry["num_gt"] = gt_counts[class_id];
    per_class[std::to_string(class_id)] = std::move(entry);
  }
  json report;
  report["per_class"] = std::move(per_class);
  report["mAP"] = result.mean_ap;
  report["mAPH"] = result.mean_aph;

  std::ofstream out(common.output, std::ios::trunc);
  if (!out) throw io::FormatError(common.output + ": cannot open for writing");
  out << report.dump(2) << '\n';
  out.close();
  run.add_output(common.output);

  std::cout << "mAP " << result.mean_ap << ", mAPH " << result.mean_aph << "\n";

  if (!opts.pr_csv.empty()) {
    std::ofstream csv(opts.pr_csv, std::ios::trunc);
    if (!csv) throw io::FormatError(opts.pr_csv + ": cannot open for writing");
    csv << "class_id,score,recall,precision\n";
    for (const auto& [class_id, curve] : result.pr_curves) {
      for (const auto& point : curve) {
        csv << class_id << ',' << point.score << ',' << point.recall << ','
            << point.precision << '\n';
      }
    }
    csv.close();
    run.add_output(opts.pr_csv);
  }

  run.finish();
  return 0;
}

int cmd_gtpaste_build(const CommonOptions& common,
                      const GtPasteBuildOptions& opts) {
  Run run(common, "gtpaste-build");
  run.add_input(opts.gts);
  const auto gts_by_frame = io::group_gts_by_frame(io::read_gts_jsonl(opts.gts));

  std::vector<std::pair<pointcloud::PointCloud, std::vector<GroundTruthObject>>>
      frames;
  for (const std::string& cloud_path : opts.clouds) {
    run.add_input(cloud_path);
    auto cloud = io::read_pcf(cloud_path);
    const auto it = gts_by_frame.find(cloud.frame_id);
    std::vector<GroundTruthObject> objects =
        it != gts_by_frame.end() ? it->second : std::vector<GroundTruthObject>{};
    if (it == gts_by_frame.end()) {
      log::warn("no ground truths for frame '" + cloud.frame_id + "'");
    }
    frames.emplace_back(std::move(cloud), std::move(objects));
  }

  const auto db = augment::build_object_db(frames);
  io::write_object_db_jsonl(common.output, db);
  run.add_output(common.output);
  std::cout << "object database: " << db.size() << " entries\n";
  run.finish();
  return 0;
}

int cmd_gtpaste_apply(const CommonOptions& common,
                      const GtPasteApplyOptions& opts) {
  Run run(common, "gtpaste-apply");
  run.add_input(opts.cloud);
  run.add_input(opts.gts);
  run.add_input(opts.db);

  auto cloud = io::read_pcf(opts.cloud);
  const auto gts_by_frame = io::group_gts_by_frame(io::read_gts_jsonl(opts.gts));
  const auto gt_it = gts_by_frame.find(cloud.frame_id);
  const std::vector<GroundTruthObject> scene_gts =
      gt_it != gts_by_frame.end() ? gt_it->second
                                  : std::vector<GroundTruthObject>{};
  const auto db = io::read_object_db_jsonl(opts.db);

  augment::FadingSchedule schedule(
      opts.total_epochs.value_or(run.config.gtpaste.total_epochs),
      opts.fade_last.value_or(run.config.gtpaste.fade_last));
  augment::PasteOptions paste_options;
  paste_options.resample_pose = run.config.gtpaste.resample_pose;

  const auto [out_cloud, out_gts] =
      augment::paste_objects(cloud, scene_gts, db, run.config.gtpaste.counts,
                             opts.epoch, schedule, run.config.seed,
                             paste_options);

  io::write_pcf(common.output, out_cloud);
  run.add_output(common.output);
  std::vector<io::GtRecord> records;
  records.reserve(out_gts.size());
  for (const auto& g : out_gts) {
    records.push_back(io::GtRecord{cloud.frame_id, g});
  }
  io::write_gts_jsonl(opts.output_gts, records);
  run.add_output(opts.output_gts);

  std::cout << "pasted " << (out_gts.size() - scene_gts.size()) << " objects ("
            << (schedule.paste_active(opts.epoch) ? "active" : "faded out")
            << ")\n";
  run.finish();
  return 0;
}

}  // namespace det3d::cli
