#include <CLI11.hpp>

#include <exception>
#include <functional>
#include <iostream>

#include "det3d/io.hpp"
#include "det3d/log.hpp"
#include "det3d/version.hpp"
#include "commands.hpp"

namespace {

// Exit codes: 0 success, 2 usage/config error, 3 input-format error,
// 4 internal invariant violation.
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitInternal = 4;

void add_common(CLI::App* cmd, det3d::cli::CommonOptions& common,
                bool output_required = true) {
  cmd->add_option("--config", common.config_path, "Pipeline config JSON");
  cmd->add_option("--seed", common.seed, "Seed override (flags > config > defaults)");
  cmd->add_option("--jobs", common.jobs, "Worker threads for frame-level parallelism")
      ->check(CLI::PositiveNumber);
  auto* output = cmd->add_option("--output", common.output, "Output path");
  if (output_required) output->required();
  cmd->add_option("--manifest", common.manifest_path,
                  "Manifest path (default: <output>.manifest.json)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"det3d: voxelization, box geometry, target assignment, "
               "TTA/WBF fusion, and AP/APH evaluation for 3D detection"};
  app.set_version_flag("--version", det3d::kVersion);
  app.require_subcommand(1);

  det3d::cli::CommonOptions common;
  for (int i = 1; i < argc; ++i) common.argv.emplace_back(argv[i]);

  std::function<int()> selected;

  auto* voxelize = app.add_subcommand("voxelize", "Voxelize a PCF1 point cloud");
  {
    auto opts = std::make_shared<det3d::cli::VoxelizeOptions>();
    voxelize->add_option("--input", opts->input, "PCF1 point-cloud file")
        ->required();
    voxelize->add_option("--dump-cells", opts->dump_cells,
                         "Write occupied cells as JSONL");
    add_common(voxelize, common, /*output_required=*/false);
    voxelize->callback([&common, opts, &selected] {
      selected = [&common, opts] { return det3d::cli::cmd_voxelize(common, *opts); };
    });
  }

  auto* tta = app.add_subcommand(
      "tta", "Expand a cloud into TTA variants, or inverse-map and fuse "
             "per-variant detections");
  {
    auto opts = std::make_shared<det3d::cli::TtaOptions>();
    auto* pattern = tta->add_option(
        "--dets-pattern", opts->dets_pattern,
        "Per-variant detections JSONL pattern; {} is the transform index");
    auto* expand = tta->add_option("--expand-cloud", opts->expand_cloud,
                                   "Write transformed copies of this PCF1 cloud");
    pattern->excludes(expand);
    add_common(tta, common);
    tta->callback([&common, opts, pattern, expand, &selected] {
      if (pattern->count() == 0 && expand->count() == 0) {
        throw CLI::RequiredError("--dets-pattern or --expand-cloud");
      }
      selected = [&common, opts] { return det3d::cli::cmd_tta(common, *opts); };
    });
  }

  auto* assign = app.add_subcommand(
      "assign", "Transport-style assignment of candidates to ground truths");
  {
    auto opts = std::make_shared<det3d::cli::AssignOptions>();
    assign->add_option("--gts", opts->gts, "Ground-truth JSONL")->required();
    assign->add_option("--candidates", opts->candidates, "Candidate JSONL")
        ->required();
    add_common(assign, common);
    assign->callback([&common, opts, &selected] {
      selected = [&common, opts] { return det3d::cli::cmd_assign(common, *opts); };
    });
  }

  auto* fuse = app.add_subcommand("fuse", "Per-class WBF or NMS within frames");
  {
    auto opts = std::make_shared<det3d::cli::FuseOptions>();
    fuse->add_option("--dets", opts->dets, "Detections JSONL")->required();
    fuse->add_option("--method", opts->method, "wbf or nms (default from config)");
    add_common(fuse, common);
    fuse->callback([&common, opts, &selected] {
      selected = [&common, opts] { return det3d::cli::cmd_fuse(common, *opts); };
    });
  }

  auto* ensemble = app.add_subcommand(
      "ensemble", "Fuse detections from multiple models with per-class weights");
  {
    auto opts = std::make_shared<det3d::cli::EnsembleOptions>();
    ensemble->add_option("--input", opts->inputs,
                         "model=path, repeat per model")
        ->required()
        ->expected(-1);
    add_common(ensemble, common);
    ensemble->callback([&common, opts, &selected] {
      selected = [&common, opts] {
        return det3d::cli::cmd_ensemble(common, *opts);
      };
    });
  }

  auto* eval = app.add_subcommand("eval", "AP / APH evaluation report");
  {
    auto opts = std::make_shared<det3d::cli::EvalOptions>();
    eval->add_option("--dets", opts->dets, "Detections JSONL")->required();
    eval->add_option("--gts", opts->gts, "Ground-truth JSONL")->required();
    eval->add_option("--pr-csv", opts->pr_csv, "Write PR curves as CSV");
    add_common(eval, common);
    eval->callback([&common, opts, &selected] {
      selected = [&common, opts] { return det3d::cli::cmd_eval(common, *opts); };
    });
  }

  auto* gtpaste_build = app.add_subcommand(
      "gtpaste-build", "Build an object database from frames and ground truths");
  {
    auto opts = std::make_shared<det3d::cli::GtPasteBuildOptions>();
    gtpaste_build
        ->add_option("--cloud", opts->clouds,
                     "PCF1 cloud per frame (frame id = file stem), repeatable")
        ->required()
        ->expected(-1);
    gtpaste_build->add_option("--gts", opts->gts, "Ground-truth JSONL")->required();
    add_common(gtpaste_build, common);
    gtpaste_build->callback([&common, opts, &selected] {
      selected = [&common, opts] {
        return det3d::cli::cmd_gtpaste_build(common, *opts);
      };
    });
  }

  auto* gtpaste_apply = app.add_subcommand(
      "gtpaste-apply", "Paste database objects into a frame under the fading "
                       "schedule");
  {
    auto opts = std::make_shared<det3d::cli::GtPasteApplyOptions>();
    gtpaste_apply->add_option("--cloud", opts->cloud, "Scene PCF1 cloud")
        ->required();
    gtpaste_apply->add_option("--gts", opts->gts, "Scene ground-truth JSONL")
        ->required();
    gtpaste_apply->add_option("--db", opts->db, "Object database JSONL")
        ->required();
    gtpaste_apply->add_option("--epoch", opts->epoch, "Current epoch, 0-indexed")
        ->required();
    gtpaste_apply->add_option("--total-epochs", opts->total_epochs,
                              "Schedule length override");
    gtpaste_apply->add_option("--fade-last", opts->fade_last,
                              "Final epochs without pasting override");
    gtpaste_apply
        ->add_option("--output-gts", opts->output_gts, "Augmented ground truths")
        ->required();
    add_common(gtpaste_apply, common);
    gtpaste_apply->callback([&common, opts, &selected] {
      selected = [&common, opts] {
        return det3d::cli::cmd_gtpaste_apply(common, *opts);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return selected ? selected() : kExitUsage;
  } catch (const det3d::io::ConfigError& e) {
    det3d::log::error(e.what());
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const det3d::io::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
