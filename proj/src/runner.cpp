#include "geossl/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"
#include "geossl/training.hpp"

namespace geossl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kScratchId = "none";
constexpr const char* kImagenetId = "imagenet";

void validate_plan_inputs(const std::vector<std::string>& datasets,
                          const std::vector<double>& fractions,
                          const std::vector<std::string>& modes,
                          const std::vector<std::uint64_t>& seeds, bool cross_domain) {
  if (datasets.empty()) raise(ErrorCode::ConfigError, "matrix plan needs at least one dataset");
  std::set<std::string> seen;
  for (const auto& id : datasets) {
    if (id.empty()) raise(ErrorCode::ConfigError, "empty dataset id in matrix plan");
    if (id == kScratchId || id == kImagenetId)
      raise(ErrorCode::ConfigError, "dataset id \"" + id + "\" is reserved");
    if (!seen.insert(id).second)
      raise(ErrorCode::ConfigError, "duplicate dataset id in matrix plan: " + id);
  }
  if (cross_domain && datasets.size() < 2)
    raise(ErrorCode::ConfigError, "cross-domain cells need at least two datasets");
  if (fractions.empty()) raise(ErrorCode::ConfigError, "matrix plan needs at least one fraction");
  for (double f : fractions)
    if (f <= 0.0 || f > 1.0)
      raise(ErrorCode::ConfigError, "fraction must lie in (0, 1], got " + std::to_string(f));
  if (modes.empty()) raise(ErrorCode::ConfigError, "matrix plan needs at least one mode");
  for (const auto& m : modes)
    if (m != "linear" && m != "finetune" && m != "supervised_baseline" && m != "scratch")
      raise(ErrorCode::ConfigError, "unknown mode in matrix plan: " + m);
  if (seeds.empty()) raise(ErrorCode::ConfigError, "matrix plan needs at least one seed");
}

/// Exclusive-create lock file; blocks briefly, then gives up. Good enough
/// for the single-writer cache contract without a daemon.
class CacheLock {
 public:
  explicit CacheLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    for (int attempt = 0; attempt < 100; ++attempt) {
      fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd_ >= 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    raise(ErrorCode::IoError, "cache entry locked by another writer: " + path_.string());
  }
  ~CacheLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  CacheLock(const CacheLock&) = delete;
  CacheLock& operator=(const CacheLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

void write_text_atomic(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorCode::IoError, "cannot open " + tmp.string());
    f << text;
    if (!f) raise(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::IoError, "rename failed for " + path.string() + ": " + ec.message());
}

SeedStats stats_over(const std::vector<double>& xs) {
  SeedStats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(xs.size()));
  return s;
}

void aggregate_cell(CellResult& cell) {
  std::vector<double> acc, prec, rec, f1, auc;
  cell.has_auc = !cell.per_seed.empty();
  for (const auto& r : cell.per_seed) {
    acc.push_back(r.accuracy);
    prec.push_back(r.precision);
    rec.push_back(r.recall);
    f1.push_back(r.f1);
    if (r.has_auc) auc.push_back(r.auc); else cell.has_auc = false;
  }
  cell.accuracy = stats_over(acc);
  cell.precision = stats_over(prec);
  cell.recall = stats_over(rec);
  cell.f1 = stats_over(f1);
  if (cell.has_auc) cell.auc = stats_over(auc);
  cell.seed_count = static_cast<int>(cell.per_seed.size());
}

json cell_to_json(const CellResult& cell) {
  json j;
  j["pretext"] = cell.config.pretext_dataset;
  j["downstream"] = cell.config.downstream_dataset;
  j["fraction"] = cell.config.fraction;
  j["mode"] = cell.config.mode;
  j["seeds"] = cell.config.seeds;
  j["ok"] = cell.ok;
  j["error"] = cell.error;
  j["digest"] = cell.digest;
  j["from_cache"] = cell.from_cache;
  j["seed_count"] = cell.seed_count;
  j["per_seed"] = json::array();
  for (const auto& r : cell.per_seed) j["per_seed"].push_back(json::parse(metrics_to_json(r)));
  j["aggregate"] = {
      {"accuracy", {{"mean", cell.accuracy.mean}, {"stddev", cell.accuracy.stddev}}},
      {"precision", {{"mean", cell.precision.mean}, {"stddev", cell.precision.stddev}}},
      {"recall", {{"mean", cell.recall.mean}, {"stddev", cell.recall.stddev}}},
      {"f1", {{"mean", cell.f1.mean}, {"stddev", cell.f1.stddev}}},
      {"auc", cell.has_auc
                  ? json({{"mean", cell.auc.mean}, {"stddev", cell.auc.stddev}})
                  : json(nullptr)},
  };
  return j;
}

CellResult cell_from_json(const json& j) {
  CellResult cell;
  cell.config.pretext_dataset = j.at("pretext").get<std::string>();
  cell.config.downstream_dataset = j.at("downstream").get<std::string>();
  cell.config.fraction = j.at("fraction").get<double>();
  cell.config.mode = j.at("mode").get<std::string>();
  cell.config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cell.ok = j.at("ok").get<bool>();
  cell.error = j.at("error").get<std::string>();
  cell.digest = j.at("digest").get<std::string>();
  cell.from_cache = j.value("from_cache", false);
  for (const auto& r : j.at("per_seed")) cell.per_seed.push_back(metrics_from_json(r.dump()));
  aggregate_cell(cell);
  cell.seed_count = j.at("seed_count").get<int>();
  return cell;
}

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt_mean_std(const SeedStats& s, int seed_count) {
  if (seed_count <= 1) return fmt_num(s.mean);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.6g ± %.2g", s.mean, s.stddev);
  return buf;
}

json table_or_throw(const json& published) {
  if (!published.is_object() || !published.contains("tables") ||
      !published.at("tables").is_array()) {
    raise(ErrorCode::FormatError, "published values file must carry a \"tables\" array");
  }
  return published.at("tables");
}

std::string render_csv(const AdaptationMatrix& matrix, const json* published) {
  std::string out;
  if (!matrix.complete) {
    int failed = 0;
    for (const auto& c : matrix.cells)
      if (!c.ok) ++failed;
    out += "# incomplete: " + std::to_string(failed) + " cell(s) failed; see matrix.json\n";
  }
  out += "pretext,downstream,fraction,mode,seed_count,accuracy,precision,recall,f1,auc\n";
  for (const auto& c : matrix.cells) {
    if (!c.ok) continue;
    out += c.config.pretext_dataset + "," + c.config.downstream_dataset + "," +
           fmt_num(c.config.fraction) + "," + c.config.mode + "," + std::to_string(c.seed_count) +
           "," + fmt_num(c.accuracy.mean) + "," + fmt_num(c.precision.mean) + "," +
           fmt_num(c.recall.mean) + "," + fmt_num(c.f1.mean) + "," +
           (c.has_auc ? fmt_num(c.auc.mean) : "") + "\n";
  }
  if (published) {
    // Reference numbers ride along as comments only, so nothing downstream
    // can parse them as computed rows.
    out += "#\n# published values (reference numbers from the original study; never computed by this run)\n";
    for (const auto& table : table_or_throw(*published)) {
      out += "# table: " + table.value("title", table.value("id", "?")) + "\n";
      std::string head = "# ";
      for (const auto& col : table.at("columns")) head += col.get<std::string>() + ",";
      if (!head.empty() && head.back() == ',') head.pop_back();
      out += head + "\n";
      for (const auto& row : table.at("rows")) {
        std::string line = "# ";
        for (const auto& v : row) {
          if (v.is_string()) line += v.get<std::string>();
          else if (v.is_number()) line += fmt_num(v.get<double>());
          else line += v.dump();
          line += ",";
        }
        if (!line.empty() && line.back() == ',') line.pop_back();
        out += line + "\n";
      }
    }
  }
  return out;
}

std::string render_markdown(const AdaptationMatrix& matrix, const json* published) {
  std::string out = "# Adaptation matrix report\n\n";
  if (!matrix.complete) {
    out += "> **Incomplete run** — some cells failed; their errors are listed below.\n\n";
  }
  out += "## Computed results (this run)\n\n";
  out += "| pretext | downstream | fraction | mode | seeds | accuracy | precision | recall | f1 | auc |\n";
  out += "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& c : matrix.cells) {
    if (!c.ok) continue;
    out += "| " + c.config.pretext_dataset + " | " + c.config.downstream_dataset + " | " +
           fmt_num(c.config.fraction) + " | " + c.config.mode + " | " +
           std::to_string(c.seed_count) + " | " + fmt_mean_std(c.accuracy, c.seed_count) + " | " +
           fmt_mean_std(c.precision, c.seed_count) + " | " + fmt_mean_std(c.recall, c.seed_count) +
           " | " + fmt_mean_std(c.f1, c.seed_count) + " | " +
           (c.has_auc ? fmt_mean_std(c.auc, c.seed_count) : "—") + " |\n";
  }
  bool any_failed = false;
  for (const auto& c : matrix.cells) any_failed |= !c.ok;
  if (any_failed) {
    out += "\n## Failed cells\n\n";
    for (const auto& c : matrix.cells) {
      if (c.ok) continue;
      out += "- " + c.config.pretext_dataset + " → " + c.config.downstream_dataset + " (fraction " +
             fmt_num(c.config.fraction) + ", " + c.config.mode + "): " + c.error + "\n";
    }
  }
  if (published) {
    out += "\n## Published values (reference numbers from the original study — never computed by this run)\n";
    for (const auto& table : table_or_throw(*published)) {
      out += "\n### " + table.value("title", table.value("id", "?")) + "\n\n";
      std::string head = "|", rule = "|";
      for (const auto& col : table.at("columns")) {
        head += " " + col.get<std::string>() + " |";
        rule += "---|";
      }
      out += head + "\n" + rule + "\n";
      for (const auto& row : table.at("rows")) {
        std::string line = "|";
        for (const auto& v : row) {
          if (v.is_string()) line += " " + v.get<std::string>() + " |";
          else if (v.is_number()) line += " " + fmt_num(v.get<double>()) + " |";
          else line += " " + v.dump() + " |";
        }
        out += line + "\n";
      }
    }
  }
  return out;
}

}  // namespace

std::vector<ExperimentConfig> plan_matrix(const std::vector<std::string>& datasets,
                                          const std::vector<double>& fractions,
                                          const std::vector<std::string>& modes,
                                          const std::vector<std::uint64_t>& seeds,
                                          bool cross_domain, bool diagonal) {
  validate_plan_inputs(datasets, fractions, modes, seeds, cross_domain);
  std::vector<ExperimentConfig> plan;
  auto add = [&](const std::string& src, const std::string& tgt, double fraction,
                 const std::string& mode) {
    ExperimentConfig cell;
    cell.pretext_dataset = src;
    cell.downstream_dataset = tgt;
    cell.fraction = fraction;
    cell.mode = mode;
    cell.seeds = seeds;
    plan.push_back(std::move(cell));
  };
  for (const auto& mode : modes) {
    // Baseline modes have no meaningful source axis: one cell per target.
    const bool baseline = mode == "scratch" || mode == "supervised_baseline";
    const std::string fixed_src = mode == "scratch" ? kScratchId : kImagenetId;
    if (cross_domain) {
      for (const auto& src : datasets) {
        for (const auto& tgt : datasets) {
          if (src == tgt) continue;
          if (baseline) continue;
          for (double f : fractions) add(src, tgt, f, mode);
        }
      }
    }
    if (diagonal || baseline) {
      for (const auto& tgt : datasets) {
        for (double f : fractions) add(baseline ? fixed_src : tgt, tgt, f, mode);
      }
    }
  }
  return plan;
}

std::vector<ExperimentConfig> plan_from_config(const RunConfig& cfg) {
  return plan_matrix(cfg.matrix.datasets, cfg.matrix.fractions, cfg.matrix.modes, cfg.matrix.seeds,
                     cfg.matrix.cross_domain, cfg.matrix.diagonal);
}

std::string pretext_cache_digest(const RunConfig& cfg, const std::string& dataset_id) {
  json j = run_config_to_json(cfg);
  json key = {
      {"role", "pretext"},   {"dataset", dataset_id},     {"split", j.at("split")},
      {"augment", j.at("augment")}, {"encoder", j.at("encoder")}, {"projection", j.at("projection")},
      {"pretext", j.at("pretext")},
  };
  return to_hex(fnv1a64(key.dump()));
}

std::string cell_cache_digest(const RunConfig& cfg, const ExperimentConfig& cell) {
  json j = run_config_to_json(cfg);
  const bool uses_pretext =
      cell.pretext_dataset != kScratchId && cell.pretext_dataset != kImagenetId;
  json key = {
      {"role", "cell"},
      {"pretext", uses_pretext ? pretext_cache_digest(cfg, cell.pretext_dataset)
                               : cell.pretext_dataset},
      {"downstream", cell.downstream_dataset},
      {"fraction", cell.fraction},
      {"mode", cell.mode},
      {"seeds", cell.seeds},
      {"split", j.at("split")},
      {"encoder", j.at("encoder")},
      {"classifier", j.at("classifier")},
      {"hyperparams", j.at("downstream")},
  };
  return to_hex(fnv1a64(key.dump()));
}

PretextArtifact ensure_pretext(const RunConfig& cfg, const std::string& dataset_id) {
  const fs::path cache = resolve_cache_dir(cfg);
  PretextArtifact artifact;
  artifact.digest = pretext_cache_digest(cfg, dataset_id);
  const fs::path dir = cache / artifact.digest;
  artifact.checkpoint_path = dir / "checkpoint";
  if (fs::exists(artifact.checkpoint_path)) return artifact;

  const auto root = resolve_dataset_root(find_dataset(cfg, dataset_id));
  const auto manifest = scan_dataset(root, dataset_id);
  const auto split = make_splits(manifest, cfg.split.ratios, cfg.split.seed);

  CacheLock lock(dir);
  if (fs::exists(artifact.checkpoint_path)) return artifact;  // raced another writer

  PretextHyperparams hp = cfg.pretext;
  hp.seed = derive_seed(cfg.pretext.seed, {"pretext", dataset_id});

  // Leakage audit: the pretext phase may read only its own source's images.
  std::vector<fs::path> accessed;
  auto* previous = set_image_access_log(&accessed);
  PretrainResult result;
  try {
    result = pretrain(manifest, split, cfg.augment, cfg.encoder, cfg.projection, hp, dir);
  } catch (...) {
    set_image_access_log(previous);
    throw;
  }
  set_image_access_log(previous);
  std::set<fs::path> own;
  for (const auto& [path, label] : manifest.samples) own.insert(path);
  for (const auto& path : accessed) {
    if (!own.count(path)) {
      raise(ErrorCode::ConfigError,
            "leakage: pretext for " + dataset_id + " read a foreign image: " + path.string());
    }
  }
  write_train_log_csv(result.log, dir / "train_log.csv");
  write_train_log_jsonl(result.log, dir / "train_log.jsonl");
  artifact.trained = true;
  return artifact;
}

AdaptationMatrix run_matrix(const RunConfig& cfg, const std::vector<ExperimentConfig>& plan) {
  if (plan.empty()) raise(ErrorCode::ConfigError, "empty matrix plan");
  const fs::path cache = resolve_cache_dir(cfg);
  fs::create_directories(cache);

  AdaptationMatrix matrix;

  std::map<std::string, DatasetManifest> manifests;
  auto manifest_of = [&](const std::string& id) -> const DatasetManifest& {
    auto it = manifests.find(id);
    if (it == manifests.end()) {
      const auto root = resolve_dataset_root(find_dataset(cfg, id));
      it = manifests.emplace(id, scan_dataset(root, id)).first;
    }
    return it->second;
  };
  std::map<std::string, SplitSpec> splits;
  auto split_of = [&](const std::string& id) -> const SplitSpec& {
    auto it = splits.find(id);
    if (it == splits.end()) {
      it = splits.emplace(id, make_splits(manifest_of(id), cfg.split.ratios, cfg.split.seed)).first;
    }
    return it->second;
  };

  // Pretext checkpoints: trained at most once per source, cached on disk,
  // failures memoized so every dependent cell reports the same cause.
  std::map<std::string, Checkpoint> pretext_ckpts;
  std::map<std::string, std::string> pretext_failures;
  auto pretext_of = [&](const std::string& src) -> const Checkpoint& {
    if (auto fit = pretext_failures.find(src); fit != pretext_failures.end())
      raise(ErrorCode::ConfigError, fit->second);
    auto it = pretext_ckpts.find(src);
    if (it != pretext_ckpts.end()) return it->second;
    try {
      PretextArtifact artifact = ensure_pretext(cfg, src);
      if (artifact.trained) ++matrix.pretext_trainings;
      it = pretext_ckpts.emplace(src, load_checkpoint(artifact.checkpoint_path)).first;
      return it->second;
    } catch (const std::exception& e) {
      pretext_failures[src] = std::string("pretext for ") + src + " failed: " + e.what();
      raise(ErrorCode::ConfigError, pretext_failures[src]);
    }
  };

  for (const auto& cell_cfg : plan) {
    CellResult cell;
    cell.config = cell_cfg;
    try {
      cell.digest = cell_cache_digest(cfg, cell_cfg);
      const fs::path dir = cache / cell.digest;
      const fs::path metrics_path = dir / "metrics.json";
      if (fs::exists(metrics_path)) {
        std::ifstream f(metrics_path);
        json j;
        f >> j;
        cell = cell_from_json(j.at("cell"));
        cell.from_cache = true;
        matrix.cells.push_back(std::move(cell));
        continue;
      }

      const Checkpoint* init = nullptr;
      Checkpoint external;
      DownstreamMode mode = DownstreamMode::kFinetune;
      if (cell_cfg.mode == "linear" || cell_cfg.mode == "finetune") {
        init = &pretext_of(cell_cfg.pretext_dataset);
        mode = cell_cfg.mode == "linear" ? DownstreamMode::kLinear : DownstreamMode::kFinetune;
      } else if (cell_cfg.mode == "supervised_baseline") {
        auto wit = cfg.external_weights.find(kImagenetId);
        if (wit == cfg.external_weights.end()) {
          raise(ErrorCode::ConfigError,
                "supervised_baseline requires config.external_weights.imagenet");
        }
        external = load_checkpoint(wit->second);
        init = &external;
      }  // scratch: init stays null

      const auto& manifest = manifest_of(cell_cfg.downstream_dataset);
      const auto& base_split = split_of(cell_cfg.downstream_dataset);
      ClassifierHeadConfig cls = cfg.classifier;
      cls.num_classes = manifest.num_classes();

      for (const auto seed : cell_cfg.seeds) {
        SplitSpec sub = subsample_labels(manifest, base_split, cell_cfg.fraction, seed);
        DownstreamHyperparams hp = cfg.downstream;
        hp.seed = derive_seed(seed, {"cell", cell.digest});
        auto result = train_downstream(manifest, sub, init, mode, cfg.encoder, cls, hp);
        ++matrix.downstream_trainings;
        cell.per_seed.push_back(result.report);
      }
      aggregate_cell(cell);
      cell.ok = true;

      CacheLock lock(dir);
      json j;
      j["cell"] = cell_to_json(cell);
      write_text_atomic(metrics_path, j.dump(2) + "\n");
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      matrix.complete = false;
    }
    matrix.cells.push_back(std::move(cell));
  }
  return matrix;
}

DownstreamArtifact run_downstream(const RunConfig& cfg, const std::string& source,
                                  const std::string& target, double fraction,
                                  const std::string& mode, std::uint64_t seed) {
  if (mode != "linear" && mode != "finetune" && mode != "scratch" &&
      mode != "supervised_baseline") {
    raise(ErrorCode::ConfigError, "unknown downstream mode: " + mode);
  }
  if ((mode == "linear" || mode == "finetune") && source.empty())
    raise(ErrorCode::ConfigError, "mode " + mode + " needs a pretext source dataset");
  if (target.empty()) raise(ErrorCode::ConfigError, "downstream target dataset is required");

  ExperimentConfig cell;
  cell.pretext_dataset =
      mode == "scratch" ? kScratchId : (mode == "supervised_baseline" ? kImagenetId : source);
  cell.downstream_dataset = target;
  cell.fraction = fraction;
  cell.mode = mode;
  cell.seeds = {seed};

  DownstreamArtifact artifact;
  artifact.digest = cell_cache_digest(cfg, cell);

  const Checkpoint* init = nullptr;
  Checkpoint init_storage;
  DownstreamMode dmode = DownstreamMode::kFinetune;
  if (mode == "linear" || mode == "finetune") {
    auto pretext = ensure_pretext(cfg, source);
    init_storage = load_checkpoint(pretext.checkpoint_path);
    init = &init_storage;
    dmode = mode == "linear" ? DownstreamMode::kLinear : DownstreamMode::kFinetune;
  } else if (mode == "supervised_baseline") {
    auto wit = cfg.external_weights.find(kImagenetId);
    if (wit == cfg.external_weights.end())
      raise(ErrorCode::ConfigError, "supervised_baseline requires config.external_weights.imagenet");
    init_storage = load_checkpoint(wit->second);
    init = &init_storage;
  }

  const auto manifest = scan_dataset(resolve_dataset_root(find_dataset(cfg, target)), target);
  const auto base_split = make_splits(manifest, cfg.split.ratios, cfg.split.seed);
  const auto sub = subsample_labels(manifest, base_split, fraction, seed);
  ClassifierHeadConfig cls = cfg.classifier;
  cls.num_classes = manifest.num_classes();
  DownstreamHyperparams hp = cfg.downstream;
  hp.seed = derive_seed(seed, {"cell", artifact.digest});

  auto result = train_downstream(manifest, sub, init, dmode, cfg.encoder, cls, hp);

  artifact.dir = cfg.output_dir / ("downstream_" + artifact.digest);
  fs::create_directories(artifact.dir);
  artifact.checkpoint_path = artifact.dir / "checkpoint";
  save_checkpoint(result.model->make_checkpoint(target, seed, hp.epochs), artifact.checkpoint_path);
  write_text_atomic(artifact.dir / "metrics.json", metrics_to_json(result.report) + "\n");
  write_train_log_csv(result.log, artifact.dir / "train_log.csv");
  write_train_log_jsonl(result.log, artifact.dir / "train_log.jsonl");
  artifact.report = result.report;
  artifact.log = result.log;
  return artifact;
}

json matrix_to_json(const AdaptationMatrix& matrix) {
  json j;
  j["complete"] = matrix.complete;
  j["pretext_trainings"] = matrix.pretext_trainings;
  j["downstream_trainings"] = matrix.downstream_trainings;
  j["cells"] = json::array();
  for (const auto& c : matrix.cells) j["cells"].push_back(cell_to_json(c));
  return j;
}

AdaptationMatrix matrix_from_json(const json& j) {
  AdaptationMatrix matrix;
  matrix.complete = j.at("complete").get<bool>();
  matrix.pretext_trainings = j.value("pretext_trainings", 0);
  matrix.downstream_trainings = j.value("downstream_trainings", 0);
  for (const auto& c : j.at("cells")) matrix.cells.push_back(cell_from_json(c));
  return matrix;
}

std::string render_report(const AdaptationMatrix& matrix, const std::string& format,
                          const json* published) {
  if (matrix.cells.empty()) raise(ErrorCode::ConfigError, "cannot report on an empty matrix");
  if (format == "csv") return render_csv(matrix, published);
  if (format == "markdown") return render_markdown(matrix, published);
  raise(ErrorCode::ConfigError, "unknown report format: " + format + " (csv, markdown)");
}

void emit_report(const AdaptationMatrix& matrix, const fs::path& out_path,
                 const std::string& format, const json* published) {
  fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
  write_text_atomic(out_path, render_report(matrix, format, published));
}

}  // namespace geossl
