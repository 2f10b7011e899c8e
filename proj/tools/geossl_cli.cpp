// Command-line front end: every operation the library exposes, driven by a
// declarative JSON config plus key=value overrides. Errors leave on stderr
// as a single machine-readable JSON line and a nonzero exit code.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "geossl/config.hpp"
#include "geossl/dataset.hpp"
#include "geossl/errors.hpp"
#include "geossl/explain.hpp"
#include "geossl/metrics.hpp"
#include "geossl/models.hpp"
#include "geossl/prng.hpp"
#include "geossl/runner.hpp"
#include "geossl/splits.hpp"
#include "geossl/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int workers = 0;  // 0: leave config value alone
  bool dry_run = false;
};

geossl::RunConfig load_config(const GlobalArgs& args, bool required) {
  json j = json::object();
  if (!args.config_path.empty()) {
    std::ifstream f(args.config_path);
    if (!f) geossl::raise(geossl::ErrorCode::NotFound, "config file not found: " + args.config_path);
    try {
      f >> j;
    } catch (const json::exception& e) {
      geossl::raise(geossl::ErrorCode::ConfigError,
                    "config parse failure in " + args.config_path + ": " + e.what());
    }
  } else if (required) {
    geossl::raise(geossl::ErrorCode::ConfigError, "this command needs --config <file>");
  }
  for (const auto& o : args.overrides) geossl::apply_config_override(j, o);
  geossl::RunConfig cfg = geossl::parse_run_config(j);
  if (args.workers > 0) cfg.workers = args.workers;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) geossl::raise(geossl::ErrorCode::IoError, "cannot open " + path.string());
  f << text;
}

json load_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) geossl::raise(geossl::ErrorCode::NotFound, "file not found: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    geossl::raise(geossl::ErrorCode::FormatError, path.string() + ": " + e.what());
  }
  return j;
}

int cmd_ingest(const std::string& root, const std::string& id, const std::string& out) {
  geossl::ScanWarnings warnings;
  auto manifest = geossl::scan_dataset(root, id, &warnings);
  if (!out.empty()) geossl::write_manifest_csv(manifest, out);
  json summary = {{"dataset", id},
                  {"root", manifest.root.generic_string()},
                  {"classes", manifest.classes},
                  {"samples", manifest.size()},
                  {"skipped", warnings.skipped_files},
                  {"manifest", out}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_synth(const geossl::SynthParams& params, const std::string& out, const std::string& id) {
  auto manifest = geossl::synth_dataset(params, out, id);
  json summary = {{"dataset", manifest.dataset_id},
                  {"root", manifest.root.generic_string()},
                  {"classes", manifest.classes},
                  {"samples", manifest.size()}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_pretrain(const GlobalArgs& args, const std::string& dataset) {
  auto cfg = load_config(args, true);
  geossl::validate_run_config_paths(cfg);
  std::string id = dataset;
  if (id.empty()) {
    if (cfg.datasets.size() != 1)
      geossl::raise(geossl::ErrorCode::ConfigError,
                    "--dataset is required when the config declares several datasets");
    id = cfg.datasets.front().id;
  }
  const std::string digest = geossl::pretext_cache_digest(cfg, id);
  if (args.dry_run) {
    json plan = {{"action", "pretrain"},
                 {"dataset", id},
                 {"digest", digest},
                 {"cache_dir", geossl::resolve_cache_dir(cfg).generic_string()},
                 {"epochs", cfg.pretext.epochs},
                 {"batch_size", cfg.pretext.batch_size}};
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  auto artifact = geossl::ensure_pretext(cfg, id);
  json result = {{"dataset", id},
                 {"digest", artifact.digest},
                 {"checkpoint", artifact.checkpoint_path.generic_string()},
                 {"trained", artifact.trained}};
  std::cout << result.dump(2) << "\n";
  return 0;
}

int cmd_downstream(const GlobalArgs& args, const std::string& source, const std::string& target,
                   double fraction, const std::string& mode, std::uint64_t seed) {
  auto cfg = load_config(args, true);
  geossl::validate_run_config_paths(cfg);
  geossl::ExperimentConfig cell;
  cell.pretext_dataset = mode == "scratch" ? "none" : (mode == "supervised_baseline" ? "imagenet" : source);
  cell.downstream_dataset = target;
  cell.fraction = fraction;
  cell.mode = mode;
  cell.seeds = {seed};
  if ((mode == "linear" || mode == "finetune") && source.empty())
    geossl::raise(geossl::ErrorCode::ConfigError, "--source is required for mode " + mode);
  if (target.empty()) geossl::raise(geossl::ErrorCode::ConfigError, "--target is required");
  const std::string digest = geossl::cell_cache_digest(cfg, cell);
  if (args.dry_run) {
    json plan = {{"action", "downstream"},
                 {"pretext", cell.pretext_dataset},
                 {"downstream", cell.downstream_dataset},
                 {"fraction", cell.fraction},
                 {"mode", cell.mode},
                 {"digest", digest}};
    std::cout << plan.dump(2) << "\n";
    return 0;
  }

  auto artifact = geossl::run_downstream(cfg, source, target, fraction, mode, seed);
  json out = {{"pretext", cell.pretext_dataset},
              {"downstream", target},
              {"fraction", fraction},
              {"mode", mode},
              {"seed", seed},
              {"digest", artifact.digest},
              {"checkpoint", artifact.checkpoint_path.generic_string()},
              {"metrics", json::parse(geossl::metrics_to_json(artifact.report))}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_matrix(const GlobalArgs& args) {
  auto cfg = load_config(args, true);
  geossl::validate_run_config_paths(cfg);
  auto plan = geossl::plan_from_config(cfg);
  if (args.dry_run) {
    json cells = json::array();
    for (const auto& cell : plan) {
      cells.push_back({{"pretext", cell.pretext_dataset},
                       {"downstream", cell.downstream_dataset},
                       {"fraction", cell.fraction},
                       {"mode", cell.mode},
                       {"seeds", cell.seeds},
                       {"digest", geossl::cell_cache_digest(cfg, cell)}});
    }
    json out = {{"action", "matrix"},
                {"cache_dir", geossl::resolve_cache_dir(cfg).generic_string()},
                {"cell_count", plan.size()},
                {"cells", cells}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  auto matrix = geossl::run_matrix(cfg, plan);
  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "matrix.json", geossl::matrix_to_json(matrix).dump(2) + "\n");
  geossl::emit_report(matrix, cfg.output_dir / "report.csv", "csv");
  geossl::emit_report(matrix, cfg.output_dir / "report.md", "markdown");
  json summary = {{"cells", matrix.cells.size()},
                  {"complete", matrix.complete},
                  {"pretext_trainings", matrix.pretext_trainings},
                  {"downstream_trainings", matrix.downstream_trainings},
                  {"matrix", (cfg.output_dir / "matrix.json").generic_string()},
                  {"report_csv", (cfg.output_dir / "report.csv").generic_string()},
                  {"report_markdown", (cfg.output_dir / "report.md").generic_string()}};
  std::cout << summary.dump(2) << "\n";
  return matrix.complete ? 0 : 2;  // partial matrix: distinct exit code
}

int cmd_report(const std::string& matrix_file, const std::string& format,
               const std::string& published_file, const std::string& out_file) {
  auto matrix = geossl::matrix_from_json(load_json_file(matrix_file));
  json published;
  const json* published_ptr = nullptr;
  if (!published_file.empty()) {
    published = load_json_file(published_file);
    published_ptr = &published;
  }
  const std::string text = geossl::render_report(matrix, format, published_ptr);
  if (out_file.empty()) {
    std::cout << text;
  } else {
    write_text(out_file, text);
    std::cout << json({{"report", out_file}, {"format", format}}).dump() << "\n";
  }
  return 0;
}

int cmd_cam(const std::string& checkpoint, const std::vector<std::string>& images,
            int class_index, const std::string& out_dir, const std::string& colormap,
            bool grid) {
  auto ckpt = geossl::load_checkpoint(checkpoint);
  auto model = geossl::downstream_from_checkpoint(ckpt, geossl::DownstreamMode::kFinetune);
  fs::create_directories(out_dir);
  json rows = json::array();
  for (const auto& image_path : images) {
    auto image = geossl::load_image(image_path);
    // Negative class index: explain the model's own prediction.
    const int target = class_index < 0 ? geossl::predict_class(*model, image) : class_index;
    auto heat = geossl::activation_map(*model, image, target);
    const auto stem = fs::path(image_path).stem().string();
    const fs::path overlay_path = fs::path(out_dir) / (stem + "_cam.png");
    geossl::overlay(heat, image, overlay_path, colormap);
    if (grid) {
      auto blended = geossl::render_overlay(heat, image, colormap);
      geossl::side_by_side({image, blended}, fs::path(out_dir) / (stem + "_grid.png"));
    }
    rows.push_back({{"image", image_path},
                    {"class", target},
                    {"overlay", overlay_path.generic_string()},
                    {"model_digest", heat.model_digest}});
  }
  std::cout << rows.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised contrastive learning for remote-sensing imagery"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --config/--set appear after the subcommand name

  GlobalArgs global;
  app.add_option("--config", global.config_path, "JSON run config; flags override file values");
  app.add_option("--set", global.overrides,
                 "Override one config value, e.g. --set pretext.lr=0.01 (repeatable)");
  app.add_option("--workers", global.workers,
                 "Upper bound on parallel workers (deterministic runs use 1)");
  app.add_flag("--dry-run", global.dry_run, "Print the resolved plan and digests, run nothing");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Scan a folder-per-class dataset into a manifest");
  std::string ingest_root, ingest_id = "dataset", ingest_out;
  ingest->add_option("--root", ingest_root, "Dataset root directory")->required();
  ingest->add_option("--id", ingest_id, "Dataset id label");
  ingest->add_option("--out", ingest_out, "Manifest CSV destination");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic dataset");
  geossl::SynthParams synth_params;
  std::string synth_out, synth_id = "synthetic", synth_layout = "full";
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", synth_params.num_classes, "Number of classes");
  synth->add_option("--per-class", synth_params.per_class, "Images per class");
  synth->add_option("--size", synth_params.image_size, "Image side length");
  synth->add_option("--seed", synth_params.seed, "Generator seed");
  synth->add_option("--layout", synth_layout, "Signal layout: full or quadrant");
  synth->add_option("--id", synth_id, "Dataset id label");

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "Contrastive pretext training for one dataset");
  std::string pretrain_dataset;
  pretrain->add_option("--dataset", pretrain_dataset, "Source dataset id (from config)");

  // downstream
  auto* down = app.add_subcommand("downstream", "Train and evaluate one downstream cell");
  std::string down_source, down_target, down_mode = "linear";
  double down_fraction = 1.0;
  std::uint64_t down_seed = 1;
  down->add_option("--source", down_source, "Pretext dataset id");
  down->add_option("--target", down_target, "Downstream dataset id")->required();
  down->add_option("--fraction", down_fraction, "Label fraction in (0,1]");
  down->add_option("--mode", down_mode, "linear | finetune | supervised_baseline | scratch");
  down->add_option("--seed", down_seed, "Run seed");

  // matrix
  auto* matrix = app.add_subcommand("matrix", "Run the full adaptation matrix from the config");

  // report
  auto* report = app.add_subcommand("report", "Render a stored matrix as csv or markdown");
  std::string report_matrix, report_format = "markdown", report_published, report_out;
  report->add_option("--matrix", report_matrix, "matrix.json produced by the matrix command")
      ->required();
  report->add_option("--format", report_format, "csv | markdown");
  report->add_option("--published", report_published,
                     "published_results.json to append as a labeled reference section");
  report->add_option("--out", report_out, "Output file (stdout when omitted)");

  // cam
  auto* cam = app.add_subcommand("cam", "Class-activation overlays for a downstream checkpoint");
  std::string cam_checkpoint, cam_out = "cam_out", cam_colormap = "jet";
  std::vector<std::string> cam_images;
  int cam_class = -1;
  bool cam_grid = false;
  cam->add_option("--checkpoint", cam_checkpoint, "Downstream checkpoint path")->required();
  cam->add_option("--image", cam_images, "Image path (repeatable)")->required();
  cam->add_option("--class", cam_class, "Target class index (default: model's prediction)");
  cam->add_option("--out", cam_out, "Output directory");
  cam->add_option("--colormap", cam_colormap, "jet | turbo | viridis");
  cam->add_flag("--grid", cam_grid, "Also write source|overlay side-by-side panels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest_root, ingest_id, ingest_out);
    if (*synth) {
      if (synth_layout == "quadrant") {
        synth_params.layout = geossl::SynthLayout::kQuadrant;
      } else if (synth_layout != "full") {
        geossl::raise(geossl::ErrorCode::ConfigError, "--layout must be full or quadrant");
      }
      return cmd_synth(synth_params, synth_out, synth_id);
    }
    if (*pretrain) return cmd_pretrain(global, pretrain_dataset);
    if (*down)
      return cmd_downstream(global, down_source, down_target, down_fraction, down_mode, down_seed);
    if (*matrix) return cmd_matrix(global);
    if (*report) return cmd_report(report_matrix, report_format, report_published, report_out);
    if (*cam) return cmd_cam(cam_checkpoint, cam_images, cam_class, cam_out, cam_colormap, cam_grid);
  } catch (const geossl::Error& e) {
    json err = {{"error", {{"code", geossl::error_code_name(e.code())}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err = {{"error", {{"code", "Internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
