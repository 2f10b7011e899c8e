#include "geossl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  raise(ErrorCode::ConfigError, path + ": " + msg);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) bad(path + "." + it.key(), "unknown key");
  }
}

double get_double(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) bad(path + "." + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) bad(path + "." + key, "expected an integer");
  return v.get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& path, const char* key,
                      std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                 !v.is_number_unsigned()))
    bad(path + "." + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) bad(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) bad(path + "." + key, "expected a string");
  return v.get<std::string>();
}

void parse_split(const json& j, const std::string& path, SplitConfig& out) {
  check_keys(j, path, {"ratios", "seed"});
  if (j.contains("ratios")) {
    const auto& r = j.at("ratios");
    if (!r.is_array() || r.size() != 3) bad(path + ".ratios", "expected [train, test, val]");
    for (int i = 0; i < 3; ++i) {
      if (!r[static_cast<std::size_t>(i)].is_number())
        bad(path + ".ratios[" + std::to_string(i) + "]", "expected a number");
      out.ratios[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(i)].get<double>();
      if (out.ratios[static_cast<std::size_t>(i)] <= 0.0)
        bad(path + ".ratios[" + std::to_string(i) + "]", "must be positive");
    }
    const double sum = out.ratios[0] + out.ratios[1] + out.ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) bad(path + ".ratios", "must sum to 1");
  }
  out.seed = get_u64(j, path, "seed", out.seed);
}

void parse_augment(const json& j, const std::string& path, AugmentationConfig& out) {
  check_keys(j, path,
             {"resize_height", "resize_width", "hflip_p", "vflip_p", "rotation_low",
              "rotation_high", "grayscale_p", "blur_p", "blur_kernel", "blur_sigma_low",
              "blur_sigma_high", "rotation_fill"});
  out.resize_height = get_int(j, path, "resize_height", out.resize_height);
  out.resize_width = get_int(j, path, "resize_width", out.resize_width);
  out.hflip_p = get_double(j, path, "hflip_p", out.hflip_p);
  out.vflip_p = get_double(j, path, "vflip_p", out.vflip_p);
  out.rotation_low = get_double(j, path, "rotation_low", out.rotation_low);
  out.rotation_high = get_double(j, path, "rotation_high", out.rotation_high);
  out.grayscale_p = get_double(j, path, "grayscale_p", out.grayscale_p);
  out.blur_p = get_double(j, path, "blur_p", out.blur_p);
  out.blur_kernel = get_int(j, path, "blur_kernel", out.blur_kernel);
  out.blur_sigma_low = get_double(j, path, "blur_sigma_low", out.blur_sigma_low);
  out.blur_sigma_high = get_double(j, path, "blur_sigma_high", out.blur_sigma_high);
  const std::string fill =
      get_string(j, path, "rotation_fill",
                 out.rotation_fill == RotationFill::kReflect ? "reflect" : "zero");
  if (fill == "reflect") {
    out.rotation_fill = RotationFill::kReflect;
  } else if (fill == "zero") {
    out.rotation_fill = RotationFill::kZero;
  } else {
    bad(path + ".rotation_fill", "expected \"reflect\" or \"zero\", got \"" + fill + "\"");
  }
  for (const auto& violation : validate_config(out)) bad(path, violation);
}

void parse_encoder(const json& j, const std::string& path, EncoderConfig& out) {
  check_keys(j, path, {"backbone", "feature_dim", "input_size"});
  out.backbone_id = get_string(j, path, "backbone", out.backbone_id);
  out.feature_dim = get_int(j, path, "feature_dim", out.feature_dim);
  out.input_size = get_int(j, path, "input_size", out.input_size);
  try {
    validate(out);
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

void parse_projection(const json& j, const std::string& path, ProjectionHeadConfig& out) {
  check_keys(j, path, {"hidden_dim", "out_dim"});
  out.hidden_dim = get_int(j, path, "hidden_dim", out.hidden_dim);
  out.out_dim = get_int(j, path, "out_dim", out.out_dim);
  if (out.hidden_dim <= 0) bad(path + ".hidden_dim", "must be positive");
  if (out.out_dim <= 0) bad(path + ".out_dim", "must be positive");
}

void parse_classifier(const json& j, const std::string& path, ClassifierHeadConfig& out) {
  check_keys(j, path, {"hidden_dim"});
  out.hidden_dim = get_int(j, path, "hidden_dim", out.hidden_dim);
  if (out.hidden_dim <= 0) bad(path + ".hidden_dim", "must be positive");
}

void parse_pretext(const json& j, const std::string& path, PretextHyperparams& out) {
  check_keys(j, path,
             {"batch_size", "lr", "momentum", "nesterov", "weight_decay", "epochs", "seed",
              "temperature", "normalization"});
  out.batch_size = get_int(j, path, "batch_size", out.batch_size);
  out.lr = get_double(j, path, "lr", out.lr);
  out.momentum = get_double(j, path, "momentum", out.momentum);
  out.nesterov = get_bool(j, path, "nesterov", out.nesterov);
  out.weight_decay = get_double(j, path, "weight_decay", out.weight_decay);
  out.epochs = get_int(j, path, "epochs", out.epochs);
  out.seed = get_u64(j, path, "seed", out.seed);
  out.temperature = get_double(j, path, "temperature", out.temperature);
  const std::string norm = get_string(
      j, path, "normalization",
      out.normalization == LossNormalization::kMeanOverPairs ? "mean_over_pairs"
                                                             : "strict_over_samples");
  if (norm == "mean_over_pairs") {
    out.normalization = LossNormalization::kMeanOverPairs;
  } else if (norm == "strict_over_samples") {
    out.normalization = LossNormalization::kStrictOverSamples;
  } else {
    bad(path + ".normalization",
        "expected \"mean_over_pairs\" or \"strict_over_samples\", got \"" + norm + "\"");
  }
  if (out.batch_size < 2) bad(path + ".batch_size", "must be at least 2");
  if (out.epochs < 1) bad(path + ".epochs", "must be at least 1");
  if (out.lr <= 0) bad(path + ".lr", "must be positive");
  if (out.temperature <= 0) bad(path + ".temperature", "must be positive");
}

void parse_downstream(const json& j, const std::string& path, DownstreamHyperparams& out) {
  check_keys(j, path,
             {"batch_size", "lr", "momentum", "nesterov", "weight_decay", "epochs", "seed"});
  out.batch_size = get_int(j, path, "batch_size", out.batch_size);
  out.lr = get_double(j, path, "lr", out.lr);
  out.momentum = get_double(j, path, "momentum", out.momentum);
  out.nesterov = get_bool(j, path, "nesterov", out.nesterov);
  out.weight_decay = get_double(j, path, "weight_decay", out.weight_decay);
  out.epochs = get_int(j, path, "epochs", out.epochs);
  out.seed = get_u64(j, path, "seed", out.seed);
  if (out.batch_size < 1) bad(path + ".batch_size", "must be at least 1");
  if (out.epochs < 1) bad(path + ".epochs", "must be at least 1");
  if (out.lr <= 0) bad(path + ".lr", "must be positive");
}

const std::set<std::string> kKnownModes{"linear", "finetune", "supervised_baseline", "scratch"};

void parse_matrix(const json& j, const std::string& path, MatrixPlanConfig& out) {
  check_keys(j, path, {"datasets", "fractions", "modes", "seeds", "cross_domain", "diagonal"});
  if (j.contains("datasets")) {
    const auto& d = j.at("datasets");
    if (!d.is_array()) bad(path + ".datasets", "expected an array of dataset ids");
    out.datasets.clear();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!d[i].is_string()) bad(path + ".datasets[" + std::to_string(i) + "]", "expected a string");
      out.datasets.push_back(d[i].get<std::string>());
    }
  }
  if (j.contains("fractions")) {
    const auto& f = j.at("fractions");
    if (!f.is_array() || f.empty()) bad(path + ".fractions", "expected a non-empty array");
    out.fractions.clear();
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!f[i].is_number()) bad(path + ".fractions[" + std::to_string(i) + "]", "expected a number");
      const double v = f[i].get<double>();
      if (v <= 0.0 || v > 1.0)
        bad(path + ".fractions[" + std::to_string(i) + "]", "must lie in (0, 1]");
      out.fractions.push_back(v);
    }
  }
  if (j.contains("modes")) {
    const auto& m = j.at("modes");
    if (!m.is_array() || m.empty()) bad(path + ".modes", "expected a non-empty array");
    out.modes.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i].is_string()) bad(path + ".modes[" + std::to_string(i) + "]", "expected a string");
      const std::string mode = m[i].get<std::string>();
      if (!kKnownModes.count(mode))
        bad(path + ".modes[" + std::to_string(i) + "]",
            "unknown mode \"" + mode + "\" (linear, finetune, supervised_baseline, scratch)");
      out.modes.push_back(mode);
    }
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (!s.is_array() || s.empty()) bad(path + ".seeds", "expected a non-empty array");
    out.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_integer())
        bad(path + ".seeds[" + std::to_string(i) + "]", "expected an integer");
      out.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }
  out.cross_domain = get_bool(j, path, "cross_domain", out.cross_domain);
  out.diagonal = get_bool(j, path, "diagonal", out.diagonal);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  check_keys(j, "config",
             {"datasets", "split", "augment", "encoder", "projection", "classifier", "pretext",
              "downstream", "matrix", "external_weights", "output_dir", "cache_dir",
              "deterministic", "workers"});

  if (j.contains("datasets")) {
    const auto& d = j.at("datasets");
    if (!d.is_array()) bad("config.datasets", "expected an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::string path = "config.datasets[" + std::to_string(i) + "]";
      check_keys(d[i], path, {"id", "root"});
      DatasetEntry entry;
      entry.id = get_string(d[i], path, "id", "");
      entry.root = get_string(d[i], path, "root", "");
      if (entry.id.empty()) bad(path + ".id", "must be non-empty");
      if (entry.root.empty()) bad(path + ".root", "must be non-empty");
      if (!seen.insert(entry.id).second) bad(path + ".id", "duplicate dataset id \"" + entry.id + "\"");
      cfg.datasets.push_back(std::move(entry));
    }
  }
  if (j.contains("split")) parse_split(j.at("split"), "config.split", cfg.split);
  if (j.contains("augment")) parse_augment(j.at("augment"), "config.augment", cfg.augment);
  if (j.contains("encoder")) parse_encoder(j.at("encoder"), "config.encoder", cfg.encoder);
  if (j.contains("projection"))
    parse_projection(j.at("projection"), "config.projection", cfg.projection);
  if (j.contains("classifier"))
    parse_classifier(j.at("classifier"), "config.classifier", cfg.classifier);
  if (j.contains("pretext")) parse_pretext(j.at("pretext"), "config.pretext", cfg.pretext);
  if (j.contains("downstream"))
    parse_downstream(j.at("downstream"), "config.downstream", cfg.downstream);
  if (j.contains("matrix")) parse_matrix(j.at("matrix"), "config.matrix", cfg.matrix);
  if (j.contains("external_weights")) {
    const auto& w = j.at("external_weights");
    if (!w.is_object()) bad("config.external_weights", "expected an object of id -> path");
    for (auto it = w.begin(); it != w.end(); ++it) {
      if (!it.value().is_string())
        bad("config.external_weights." + it.key(), "expected a string path");
      cfg.external_weights[it.key()] = it.value().get<std::string>();
    }
  }
  cfg.output_dir = get_string(j, "config", "output_dir", cfg.output_dir.string());
  cfg.cache_dir = get_string(j, "config", "cache_dir", cfg.cache_dir.string());
  cfg.deterministic = get_bool(j, "config", "deterministic", cfg.deterministic);
  cfg.workers = get_int(j, "config", "workers", cfg.workers);
  if (cfg.workers < 1) bad("config.workers", "must be at least 1");

  // Every matrix dataset id must be declared.
  std::set<std::string> declared;
  for (const auto& d : cfg.datasets) declared.insert(d.id);
  for (std::size_t i = 0; i < cfg.matrix.datasets.size(); ++i) {
    if (!declared.count(cfg.matrix.datasets[i]))
      bad("config.matrix.datasets[" + std::to_string(i) + "]",
          "unknown dataset id \"" + cfg.matrix.datasets[i] + "\"");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorCode::NotFound, "config file not found: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigError, "config parse failure in " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["datasets"] = json::array();
  for (const auto& d : cfg.datasets)
    j["datasets"].push_back({{"id", d.id}, {"root", d.root.generic_string()}});
  j["split"] = {{"ratios", cfg.split.ratios}, {"seed", cfg.split.seed}};
  j["augment"] = {
      {"resize_height", cfg.augment.resize_height},
      {"resize_width", cfg.augment.resize_width},
      {"hflip_p", cfg.augment.hflip_p},
      {"vflip_p", cfg.augment.vflip_p},
      {"rotation_low", cfg.augment.rotation_low},
      {"rotation_high", cfg.augment.rotation_high},
      {"grayscale_p", cfg.augment.grayscale_p},
      {"blur_p", cfg.augment.blur_p},
      {"blur_kernel", cfg.augment.blur_kernel},
      {"blur_sigma_low", cfg.augment.blur_sigma_low},
      {"blur_sigma_high", cfg.augment.blur_sigma_high},
      {"rotation_fill", cfg.augment.rotation_fill == RotationFill::kReflect ? "reflect" : "zero"},
  };
  j["encoder"] = {{"backbone", cfg.encoder.backbone_id},
                  {"feature_dim", cfg.encoder.feature_dim},
                  {"input_size", cfg.encoder.input_size}};
  j["projection"] = {{"hidden_dim", cfg.projection.hidden_dim}, {"out_dim", cfg.projection.out_dim}};
  j["classifier"] = {{"hidden_dim", cfg.classifier.hidden_dim}};
  j["pretext"] = {{"batch_size", cfg.pretext.batch_size},
                  {"lr", cfg.pretext.lr},
                  {"momentum", cfg.pretext.momentum},
                  {"nesterov", cfg.pretext.nesterov},
                  {"weight_decay", cfg.pretext.weight_decay},
                  {"epochs", cfg.pretext.epochs},
                  {"seed", cfg.pretext.seed},
                  {"temperature", cfg.pretext.temperature},
                  {"normalization", cfg.pretext.normalization == LossNormalization::kMeanOverPairs
                                        ? "mean_over_pairs"
                                        : "strict_over_samples"}};
  j["downstream"] = {{"batch_size", cfg.downstream.batch_size},
                     {"lr", cfg.downstream.lr},
                     {"momentum", cfg.downstream.momentum},
                     {"nesterov", cfg.downstream.nesterov},
                     {"weight_decay", cfg.downstream.weight_decay},
                     {"epochs", cfg.downstream.epochs},
                     {"seed", cfg.downstream.seed}};
  j["matrix"] = {{"datasets", cfg.matrix.datasets},   {"fractions", cfg.matrix.fractions},
                 {"modes", cfg.matrix.modes},         {"seeds", cfg.matrix.seeds},
                 {"cross_domain", cfg.matrix.cross_domain}, {"diagonal", cfg.matrix.diagonal}};
  json weights = json::object();
  for (const auto& [k, v] : cfg.external_weights) weights[k] = v.generic_string();
  j["external_weights"] = weights;
  j["output_dir"] = cfg.output_dir.generic_string();
  j["cache_dir"] = cfg.cache_dir.generic_string();
  j["deterministic"] = cfg.deterministic;
  j["workers"] = cfg.workers;
  return j;
}

std::string run_config_digest(const RunConfig& cfg) {
  // nlohmann objects iterate in sorted key order, so the dump is canonical.
  return to_hex(fnv1a64(run_config_to_json(cfg).dump()));
}

void apply_config_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    raise(ErrorCode::ConfigError, "override must look like key.path=value: " + assignment);
  }
  const std::string dotted = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings stay strings
  }

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) raise(ErrorCode::ConfigError, "empty key segment in override: " + assignment);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

void validate_run_config_paths(const RunConfig& cfg) {
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i) {
    const auto root = resolve_dataset_root(cfg.datasets[i]);
    if (!std::filesystem::is_directory(root)) {
      raise(ErrorCode::ConfigError, "config.datasets[" + std::to_string(i) + "].root: directory not found: " +
                                        root.string());
    }
  }
  for (const auto& [id, path] : cfg.external_weights) {
    if (!std::filesystem::exists(path)) {
      raise(ErrorCode::ConfigError,
            "config.external_weights." + id + ": file not found: " + path.string());
    }
  }
}

std::filesystem::path resolve_cache_dir(const RunConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("GEOSSL_CACHE_DIR"); env && *env) return env;
  return cfg.output_dir / "cache";
}

std::filesystem::path resolve_dataset_root(const DatasetEntry& entry) {
  if (entry.root.is_absolute()) return entry.root;
  return data_root_from_env() / entry.root;
}

const DatasetEntry& find_dataset(const RunConfig& cfg, const std::string& id) {
  for (const auto& d : cfg.datasets)
    if (d.id == id) return d;
  raise(ErrorCode::NotFound, "dataset id not declared in config: " + id);
}

}  // namespace geossl
