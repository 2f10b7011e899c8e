#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "geossl/config.hpp"
#include "geossl/errors.hpp"

namespace fs = std::filesystem;
using geossl::RunConfig;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("geossl_cfg_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json minimal_config() {
  return json{
      {"datasets", json::array({{{"id", "a"}, {"root", "/tmp/a"}}, {{"id", "b"}, {"root", "/tmp/b"}}})},
      {"matrix", {{"datasets", {"a", "b"}}}},
  };
}

std::string error_message(const json& j) {
  try {
    geossl::parse_run_config(j);
  } catch (const geossl::Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults survive an empty config") {
  RunConfig cfg = geossl::parse_run_config(json::object());
  CHECK(cfg.encoder.backbone_id == "small_conv");
  CHECK(cfg.encoder.feature_dim == 128);
  CHECK(cfg.projection.hidden_dim == 2048);
  CHECK(cfg.projection.out_dim == 1024);
  CHECK(cfg.classifier.hidden_dim == 512);
  CHECK(cfg.pretext.batch_size == 256);
  CHECK(cfg.pretext.lr == doctest::Approx(5e-4));
  CHECK(cfg.pretext.epochs == 100);
  CHECK(cfg.pretext.temperature == doctest::Approx(0.5));
  CHECK(cfg.downstream.batch_size == 64);
  CHECK(cfg.split.ratios[0] == doctest::Approx(0.7));
  CHECK(cfg.matrix.fractions == std::vector<double>{0.1, 0.5, 1.0});
  CHECK(cfg.workers == 1);
  CHECK(cfg.deterministic);
}

TEST_CASE("full round trip preserves every field") {
  json j = minimal_config();
  j["pretext"] = {{"batch_size", 32}, {"lr", 0.01}, {"epochs", 7}, {"temperature", 0.3},
                  {"normalization", "strict_over_samples"}};
  j["encoder"] = {{"backbone", "small_conv"}, {"feature_dim", 64}, {"input_size", 64}};
  j["matrix"] = {{"datasets", {"a", "b"}}, {"fractions", {0.5, 1.0}}, {"modes", {"linear", "scratch"}},
                 {"seeds", {7, 8, 9}}, {"diagonal", false}};
  j["augment"] = {{"blur_kernel", 11}, {"grayscale_p", 0.3}};
  j["output_dir"] = "runs/exp1";

  RunConfig cfg = geossl::parse_run_config(j);
  CHECK(cfg.pretext.batch_size == 32);
  CHECK(cfg.pretext.normalization == geossl::LossNormalization::kStrictOverSamples);
  CHECK(cfg.encoder.feature_dim == 64);
  CHECK(cfg.matrix.modes == std::vector<std::string>{"linear", "scratch"});
  CHECK(cfg.matrix.seeds == std::vector<std::uint64_t>{7, 8, 9});
  CHECK_FALSE(cfg.matrix.diagonal);
  CHECK(cfg.augment.blur_kernel == 11);
  CHECK(cfg.output_dir == fs::path("runs/exp1"));

  // to_json -> parse again -> identical json
  json j2 = geossl::run_config_to_json(cfg);
  RunConfig cfg2 = geossl::parse_run_config(j2);
  CHECK(geossl::run_config_to_json(cfg2) == j2);
}

TEST_CASE("digest ignores key order but tracks values") {
  json a = minimal_config();
  a["pretext"] = {{"lr", 0.01}, {"batch_size", 32}};
  json b = json::parse(R"({
    "matrix": {"datasets": ["a", "b"]},
    "pretext": {"batch_size": 32, "lr": 0.01},
    "datasets": [{"root": "/tmp/a", "id": "a"}, {"root": "/tmp/b", "id": "b"}]
  })");
  auto da = geossl::run_config_digest(geossl::parse_run_config(a));
  auto db = geossl::run_config_digest(geossl::parse_run_config(b));
  CHECK(da == db);

  json c = a;
  c["pretext"]["lr"] = 0.02;
  CHECK(geossl::run_config_digest(geossl::parse_run_config(c)) != da);
}

TEST_CASE("validation errors carry field paths") {
  json j = minimal_config();
  j["pretext"] = {{"batch_size", 1}};
  CHECK(error_message(j).find("config.pretext.batch_size") != std::string::npos);

  j = minimal_config();
  j["matrix"]["fractions"] = {0.5, 1.5};
  CHECK(error_message(j).find("config.matrix.fractions[1]") != std::string::npos);

  j = minimal_config();
  j["matrix"]["modes"] = {"linear", "warp"};
  CHECK(error_message(j).find("config.matrix.modes[1]") != std::string::npos);

  j = minimal_config();
  j["matrix"]["datasets"] = {"a", "ghost"};
  CHECK(error_message(j).find("config.matrix.datasets[1]") != std::string::npos);

  j = minimal_config();
  j["split"] = {{"ratios", {0.5, 0.3, 0.1}}};
  CHECK(error_message(j).find("config.split.ratios") != std::string::npos);

  j = minimal_config();
  j["augment"] = {{"blur_kernel", 10}};
  CHECK(error_message(j).find("config.augment") != std::string::npos);

  j = minimal_config();
  j["encoder"] = {{"backbone", "vgg11"}};
  CHECK(error_message(j).find("config.encoder") != std::string::npos);
}

TEST_CASE("unknown keys are rejected with their path") {
  json j = minimal_config();
  j["pretxt"] = {{"lr", 0.1}};  // typo
  CHECK(error_message(j).find("config.pretxt") != std::string::npos);

  j = minimal_config();
  j["pretext"] = {{"learning_rate", 0.1}};
  CHECK(error_message(j).find("config.pretext.learning_rate") != std::string::npos);
}

TEST_CASE("duplicate dataset ids are rejected") {
  json j = json{{"datasets", json::array({{{"id", "a"}, {"root", "/x"}}, {{"id", "a"}, {"root", "/y"}}})}};
  CHECK(error_message(j).find("duplicate dataset id") != std::string::npos);
}

TEST_CASE("overrides replace nested values and parse types") {
  json j = minimal_config();
  geossl::apply_config_override(j, "pretext.lr=0.25");
  geossl::apply_config_override(j, "encoder.feature_dim=64");
  geossl::apply_config_override(j, "encoder.input_size=32");
  geossl::apply_config_override(j, "output_dir=runs/override");
  geossl::apply_config_override(j, "matrix.seeds=[4,5]");
  RunConfig cfg = geossl::parse_run_config(j);
  CHECK(cfg.pretext.lr == doctest::Approx(0.25));
  CHECK(cfg.encoder.feature_dim == 64);
  CHECK(cfg.output_dir == fs::path("runs/override"));
  CHECK(cfg.matrix.seeds == std::vector<std::uint64_t>{4, 5});

  CHECK_THROWS_AS(geossl::apply_config_override(j, "no_equals_sign"), geossl::Error);
}

TEST_CASE("config file loading reports parse failures and missing files") {
  auto dir = temp_dir("load");
  {
    std::ofstream f(dir / "good.json");
    f << minimal_config().dump(2);
  }
  RunConfig cfg = geossl::load_run_config(dir / "good.json");
  CHECK(cfg.datasets.size() == 2);

  {
    std::ofstream f(dir / "broken.json");
    f << "{ not json";
  }
  CHECK_THROWS_AS(geossl::load_run_config(dir / "broken.json"), geossl::Error);
  CHECK_THROWS_AS(geossl::load_run_config(dir / "missing.json"), geossl::Error);
  fs::remove_all(dir);
}

TEST_CASE("path validation checks dataset roots") {
  auto dir = temp_dir("paths");
  fs::create_directories(dir / "real");
  json j;
  j["datasets"] = json::array({{{"id", "ok"}, {"root", (dir / "real").string()}}});
  RunConfig cfg = geossl::parse_run_config(j);
  CHECK_NOTHROW(geossl::validate_run_config_paths(cfg));

  j["datasets"].push_back({{"id", "gone"}, {"root", (dir / "gone").string()}});
  cfg = geossl::parse_run_config(j);
  try {
    geossl::validate_run_config_paths(cfg);
    CHECK(false);
  } catch (const geossl::Error& e) {
    CHECK(std::string(e.what()).find("config.datasets[1].root") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("cache dir resolution prefers explicit, then env, then output") {
  RunConfig cfg;
  cfg.output_dir = "out";
  ::unsetenv("GEOSSL_CACHE_DIR");
  CHECK(geossl::resolve_cache_dir(cfg) == fs::path("out") / "cache");
  ::setenv("GEOSSL_CACHE_DIR", "/tmp/envcache", 1);
  CHECK(geossl::resolve_cache_dir(cfg) == fs::path("/tmp/envcache"));
  cfg.cache_dir = "/tmp/explicit";
  CHECK(geossl::resolve_cache_dir(cfg) == fs::path("/tmp/explicit"));
  ::unsetenv("GEOSSL_CACHE_DIR");
}
