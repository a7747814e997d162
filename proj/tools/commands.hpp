#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace det3d::cli {

/// Options shared by every subcommand. Precedence for values that also
/// live in the config file is flags > config > defaults.
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string output;
  std::string manifest_path;  // default: <output>.manifest.json
  std::vector<std::string> argv;
};

struct VoxelizeOptions {
  std::string input;
  std::string dump_cells;
};

struct TtaOptions {
  std::string dets_pattern;  // per-variant files, "{}" replaced by the index
  std::string expand_cloud;  // write transformed clouds instead
};

struct AssignOptions {
  std::string gts;
  std::string candidates;
};

struct FuseOptions {
  std::string dets;
  std::string method;  // empty = config value
};

struct EnsembleOptions {
  std::vector<std::string> inputs;  // "model=path"
};

struct EvalOptions {
  std::string dets;
  std::string gts;
  std::string pr_csv;
};

struct GtPasteBuildOptions {
  std::vector<std::string> clouds;
  std::string gts;
};

struct GtPasteApplyOptions {
  std::string cloud;
  std::string gts;
  std::string db;
  int epoch = 0;
  std::optional<int> total_epochs;
  std::optional<int> fade_last;
  std::string output_gts;
};

int cmd_voxelize(const CommonOptions& common, const VoxelizeOptions& opts);
int cmd_tta(const CommonOptions& common, const TtaOptions& opts);
int cmd_assign(const CommonOptions& common, const AssignOptions& opts);
int cmd_fuse(const CommonOptions& common, const FuseOptions& opts);
int cmd_ensemble(const CommonOptions& common, const EnsembleOptions& opts);
int cmd_eval(const CommonOptions& common, const EvalOptions& opts);
int cmd_gtpaste_build(const CommonOptions& common,
                      const GtPasteBuildOptions& opts);
int cmd_gtpaste_apply(const CommonOptions& common,
                      const GtPasteApplyOptions& opts);

}  // namespace det3d::cli
