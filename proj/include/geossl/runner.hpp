#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "geossl/config.hpp"
#include "geossl/metrics.hpp"
#include "geossl/training.hpp"

namespace geossl {

/// One matrix cell before execution: which pretext checkpoint feeds which
/// downstream dataset, at which label fraction, evaluated how. `scratch`
/// cells carry pretext id "none"; `supervised_baseline` cells carry
/// "imagenet" and need an external weights path.
struct ExperimentConfig {
  std::string pretext_dataset;
  std::string downstream_dataset;
  double fraction = 1.0;
  std::string mode = "linear";
  std::vector<std::uint64_t> seeds;
};

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;  // population std over seeds; 0 for a single seed
};

struct CellResult {
  ExperimentConfig config;
  bool ok = false;
  std::string error;
  int seed_count = 0;
  SeedStats accuracy, precision, recall, f1, auc;
  bool has_auc = false;
  std::vector<MetricsReport> per_seed;
  std::string digest;      // cache key
  bool from_cache = false;
};

struct AdaptationMatrix {
  std::vector<CellResult> cells;
  bool complete = true;        // false as soon as any cell failed
  int pretext_trainings = 0;   // actual trainings this run (cache hits excluded)
  int downstream_trainings = 0;
};

/// Cross-domain cells are every ordered pair (s != t); diagonal cells are
/// (s == s). Ordering is deterministic: modes outermost, then source,
/// target, fraction; cross-domain block first, then the diagonal block.
std::vector<ExperimentConfig> plan_matrix(const std::vector<std::string>& datasets,
                                          const std::vector<double>& fractions,
                                          const std::vector<std::string>& modes,
                                          const std::vector<std::uint64_t>& seeds,
                                          bool cross_domain = true, bool diagonal = false);

std::vector<ExperimentConfig> plan_from_config(const RunConfig& cfg);

/// Cache keys. The pretext digest covers everything that shapes the
/// checkpoint bytes; the cell digest additionally covers the downstream
/// recipe and seed list.
std::string pretext_cache_digest(const RunConfig& cfg, const std::string& dataset_id);
std::string cell_cache_digest(const RunConfig& cfg, const ExperimentConfig& cell);

struct PretextArtifact {
  std::string digest;
  std::filesystem::path checkpoint_path;
  bool trained = false;  // false when the cache already held it
};

/// Trains the pretext checkpoint for one source, or reuses the cached one.
/// While training, an image-access audit rejects any read outside the
/// source dataset. Shared by the matrix runner and the CLI.
PretextArtifact ensure_pretext(const RunConfig& cfg, const std::string& dataset_id);

/// Executes the plan. Pretext training runs at most once per source (the
/// cache under resolve_cache_dir is checked first); each cell trains one
/// downstream model per seed and aggregates mean +- std. A failing cell is
/// recorded with its error and the run continues.
AdaptationMatrix run_matrix(const RunConfig& cfg, const std::vector<ExperimentConfig>& plan);

struct DownstreamArtifact {
  std::string digest;  // cell digest for the single-seed cell
  std::filesystem::path dir;
  std::filesystem::path checkpoint_path;
  MetricsReport report;
  TrainLog log;
};

/// Trains one downstream cell outside the matrix loop and keeps the fitted
/// model: resolves the encoder init exactly like run_matrix (so metrics for
/// the same cell agree), then writes checkpoint, metrics and train logs
/// under output_dir/downstream_<digest>/.
DownstreamArtifact run_downstream(const RunConfig& cfg, const std::string& source,
                                  const std::string& target, double fraction,
                                  const std::string& mode, std::uint64_t seed);

nlohmann::json matrix_to_json(const AdaptationMatrix& matrix);
AdaptationMatrix matrix_from_json(const nlohmann::json& j);

/// Report emitters. Both formats carry the same numbers; `published`, when
/// given, is appended as a clearly labeled reference section and never
/// mixed into computed rows.
std::string render_report(const AdaptationMatrix& matrix, const std::string& format,
                          const nlohmann::json* published = nullptr);
void emit_report(const AdaptationMatrix& matrix, const std::filesystem::path& out_path,
                 const std::string& format, const nlohmann::json* published = nullptr);

}  // namespace geossl
