#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "geossl/augment.hpp"
#include "geossl/models.hpp"
#include "geossl/training.hpp"

namespace geossl {

struct DatasetEntry {
  std::string id;
  std::filesystem::path root;  // relative roots resolve under GEOSSL_DATA_ROOT
};

struct SplitConfig {
  std::array<double, 3> ratios{0.7, 0.2, 0.1};  // train, test, val
  std::uint64_t seed = 42;
};

struct MatrixPlanConfig {
  std::vector<std::string> datasets;  // ids from RunConfig::datasets
  std::vector<double> fractions{0.1, 0.5, 1.0};
  std::vector<std::string> modes{"linear"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool cross_domain = true;
  bool diagonal = true;
};

/// One declarative file drives every command. Field defaults match the
/// struct initializers; unknown keys are rejected so typos fail loudly
/// before any work starts.
struct RunConfig {
  std::vector<DatasetEntry> datasets;
  SplitConfig split;
  AugmentationConfig augment;
  EncoderConfig encoder;
  ProjectionHeadConfig projection;
  ClassifierHeadConfig classifier;  // num_classes is resolved per dataset
  PretextHyperparams pretext;
  DownstreamHyperparams downstream;
  MatrixPlanConfig matrix;
  std::map<std::string, std::filesystem::path> external_weights;  // e.g. "imagenet"
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_dir;  // empty: $GEOSSL_CACHE_DIR, else output_dir/cache
  bool deterministic = true;
  int workers = 1;
};

/// Structural validation with full field paths in every error message
/// ("matrix.fractions[1]: must lie in (0, 1]").
RunConfig parse_run_config(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Digest of the canonical serialization; object-key order in the source
/// file never changes it.
std::string run_config_digest(const RunConfig& cfg);

/// Applies one `a.b.c=value` override onto the raw JSON before parsing.
/// Values parse as JSON when they can, otherwise as bare strings.
void apply_config_override(nlohmann::json& j, const std::string& assignment);

/// Dataset roots must exist on disk; called by commands before real work.
void validate_run_config_paths(const RunConfig& cfg);

std::filesystem::path resolve_cache_dir(const RunConfig& cfg);
std::filesystem::path resolve_dataset_root(const DatasetEntry& entry);
const DatasetEntry& find_dataset(const RunConfig& cfg, const std::string& id);

}  // namespace geossl
