#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "geossl/dataset.hpp"
#include "geossl/errors.hpp"
#include "geossl/splits.hpp"

namespace fs = std::filesystem;
using geossl::DatasetManifest;
using geossl::Split;
using geossl::SplitSpec;
using geossl::SynthParams;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("geossl_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

SynthParams small_params() {
  SynthParams p;
  p.num_classes = 4;
  p.per_class = 8;
  p.image_size = 32;
  p.seed = 5;
  return p;
}

}  // namespace

TEST_CASE("synth_dataset writes the expected manifest") {
  auto root = temp_dir("synth_manifest");
  SynthParams p;
  p.num_classes = 4;
  p.per_class = 30;
  p.image_size = 64;
  p.seed = 1;
  auto manifest = geossl::synth_dataset(p, root, "trio_a");
  CHECK(manifest.size() == 120);
  CHECK(manifest.num_classes() == 4);
  CHECK(manifest.image_size_hint == std::pair<int, int>{64, 64});
  for (int ci = 0; ci < 4; ++ci) {
    CHECK(manifest.class_sample_indices(ci).size() == 30);
  }
  fs::remove_all(root);
}

TEST_CASE("synth_dataset is byte-deterministic under one seed") {
  auto root_a = temp_dir("synth_det_a");
  auto root_b = temp_dir("synth_det_b");
  auto p = small_params();
  auto ma = geossl::synth_dataset(p, root_a, "a");
  auto mb = geossl::synth_dataset(p, root_b, "b");
  REQUIRE(ma.size() == mb.size());
  for (std::size_t i = 0; i < ma.size(); ++i) {
    CHECK(slurp(ma.samples[i].first) == slurp(mb.samples[i].first));
  }
  fs::remove_all(root_a);
  fs::remove_all(root_b);
}

TEST_CASE("synth_dataset validates its arguments") {
  auto root = temp_dir("synth_args");
  SynthParams p = small_params();
  p.num_classes = 1;
  CHECK_THROWS_AS(geossl::synth_dataset(p, root, "x"), geossl::Error);
  fs::remove_all(root);
}

TEST_CASE("scan_dataset errors on missing and empty roots") {
  CHECK_THROWS_AS(geossl::scan_dataset("/nonexistent/geossl", "x"), geossl::Error);
  auto root = temp_dir("scan_empty");
  CHECK_THROWS_AS(geossl::scan_dataset(root, "x"), geossl::Error);
  fs::create_directories(root / "forest");
  try {
    geossl::scan_dataset(root, "x");
    CHECK(false);
  } catch (const geossl::Error& e) {
    CHECK(e.code() == geossl::ErrorCode::EmptyClass);
  }
  fs::remove_all(root);
}

TEST_CASE("scan_dataset skips undecodable files via the warning channel") {
  auto root = temp_dir("scan_warn");
  auto manifest = geossl::synth_dataset(small_params(), root, "w");
  {
    std::ofstream junk(root / "class00" / "broken.png", std::ios::binary);
    junk << "not a png";
  }
  geossl::ScanWarnings warnings;
  auto rescanned = geossl::scan_dataset(root, "w", &warnings);
  CHECK(rescanned.size() == manifest.size());
  REQUIRE(warnings.skipped_files.size() == 1);
  CHECK(warnings.skipped_files[0].find("broken.png") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("load_image replicates grayscale and rejects truncated files") {
  auto dir = temp_dir("load_image");
  {
    cv::Mat gray(40, 40, CV_8UC1);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>((y * 40 + x) % 251);
    cv::imwrite((dir / "gray_source.png").string(), gray);
  }
  auto loaded = geossl::load_image(dir / "gray_source.png");
  CHECK(loaded.height == 40);
  CHECK(loaded.width == 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      auto v = static_cast<std::uint8_t>((y * 40 + x) % 251);
      CHECK(loaded.at(y, x, 0) == v);
      CHECK(loaded.at(y, x, 1) == v);
      CHECK(loaded.at(y, x, 2) == v);
    }

  {
    std::ofstream f(dir / "trunc.png", std::ios::binary);
    f << "\x89PNG\r\n";
  }
  try {
    geossl::load_image(dir / "trunc.png");
    CHECK(false);
  } catch (const geossl::Error& e) {
    CHECK(e.code() == geossl::ErrorCode::DecodeError);
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest CSV round-trips") {
  auto root = temp_dir("manifest_rt");
  auto manifest = geossl::synth_dataset(small_params(), root, "rt");
  auto csv = root / "manifest.csv";
  geossl::write_manifest_csv(manifest, csv);
  auto loaded = geossl::read_manifest_csv(csv);
  CHECK(loaded.dataset_id == manifest.dataset_id);
  CHECK(loaded.classes == manifest.classes);
  REQUIRE(loaded.size() == manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    CHECK(loaded.samples[i].first == manifest.samples[i].first);
    CHECK(loaded.samples[i].second == manifest.samples[i].second);
  }
  fs::remove_all(root);
}

TEST_CASE("split counts follow the rounding rule") {
  // 200-sample class: 140/40/20. 100-sample class: 70/20/10.
  auto make_manifest = [](int per_class) {
    DatasetManifest m;
    m.dataset_id = "fake";
    m.classes = {"a", "b"};
    for (int ci = 0; ci < 2; ++ci)
      for (int i = 0; i < per_class; ++i)
        m.samples.emplace_back("img_" + std::to_string(ci) + "_" + std::to_string(i) + ".png", ci);
    return m;
  };
  for (int per_class : {200, 100}) {
    auto m = make_manifest(per_class);
    auto spec = geossl::make_splits(m, {0.7, 0.2, 0.1}, 3);
    for (int ci = 0; ci < 2; ++ci) {
      int n_train = 0, n_test = 0, n_val = 0;
      for (auto idx : m.class_sample_indices(ci)) {
        if (spec.assignment[idx] == Split::kTrain) ++n_train;
        else if (spec.assignment[idx] == Split::kTest) ++n_test;
        else ++n_val;
      }
      CHECK(n_train == per_class * 7 / 10);
      CHECK(n_test == per_class * 2 / 10);
      CHECK(n_val == per_class / 10);
    }
  }
}

TEST_CASE("splits partition the manifest and are deterministic") {
  auto root = temp_dir("split_part");
  auto manifest = geossl::synth_dataset(small_params(), root, "part");
  auto a = geossl::make_splits(manifest, {0.7, 0.2, 0.1}, 11);
  auto b = geossl::make_splits(manifest, {0.7, 0.2, 0.1}, 11);
  CHECK(a.assignment == b.assignment);
  CHECK(a.retained == b.retained);

  auto train = a.indices_of(Split::kTrain);
  auto test = a.indices_of(Split::kTest);
  auto val = a.indices_of(Split::kVal);
  CHECK(train.size() + test.size() + val.size() == manifest.size());
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  all.insert(val.begin(), val.end());
  CHECK(all.size() == manifest.size());

  // Stratification: per class, counts differ from ratio*n by < 1.
  for (int ci = 0; ci < manifest.num_classes(); ++ci) {
    auto members = manifest.class_sample_indices(ci);
    double n = static_cast<double>(members.size());
    int n_train = 0, n_test = 0, n_val = 0;
    for (auto idx : members) {
      if (a.assignment[idx] == Split::kTrain) ++n_train;
      else if (a.assignment[idx] == Split::kTest) ++n_test;
      else ++n_val;
    }
    CHECK(std::fabs(n_train - 0.7 * n) < 1.0);
    CHECK(std::fabs(n_test - 0.2 * n) < 1.0);
    CHECK(std::fabs(n_val - 0.1 * n) < 1.0);
  }
  fs::remove_all(root);
}

TEST_CASE("make_splits rejects tiny classes and bad ratios") {
  DatasetManifest m;
  m.dataset_id = "tiny";
  m.classes = {"a"};
  m.samples.emplace_back("x0.png", 0);
  m.samples.emplace_back("x1.png", 0);
  try {
    geossl::make_splits(m, {0.7, 0.2, 0.1}, 1);
    CHECK(false);
  } catch (const geossl::Error& e) {
    CHECK(e.code() == geossl::ErrorCode::StratificationError);
  }
  m.samples.emplace_back("x2.png", 0);
  CHECK_THROWS_AS(geossl::make_splits(m, {0.7, 0.2, 0.2}, 1), geossl::Error);
  CHECK_NOTHROW(geossl::make_splits(m, {0.7, 0.2, 0.1}, 1));
}

TEST_CASE("label subsampling: identity, rounding guard, nesting") {
  auto root = temp_dir("subsample");
  SynthParams p = small_params();
  p.per_class = 10;  // 7 train per class under 0.7/0.2/0.1
  auto manifest = geossl::synth_dataset(p, root, "sub");
  auto split = geossl::make_splits(manifest, {0.7, 0.2, 0.1}, 2);

  auto full = geossl::subsample_labels(manifest, split, 1.0, 9);
  CHECK(full.retained_train_indices() == split.indices_of(Split::kTrain));

  // class train size 7, fraction 0.1 -> max(1, round(0.7)) = 1 per class
  auto tiny = geossl::subsample_labels(manifest, split, 0.1, 9);
  CHECK(tiny.retained_train_indices().size() == 4);

  // nesting: retained(0.1) subset of retained(0.5) subset of retained(1.0)
  auto half = geossl::subsample_labels(manifest, split, 0.5, 9);
  auto tiny_set = tiny.retained_train_indices();
  auto half_set = half.retained_train_indices();
  std::set<std::size_t> half_lookup(half_set.begin(), half_set.end());
  for (auto idx : tiny_set) CHECK(half_lookup.count(idx) == 1);
  std::set<std::size_t> full_lookup(split.indices_of(Split::kTrain).begin(),
                                    split.indices_of(Split::kTrain).end());
  for (auto idx : half_set) CHECK(full_lookup.count(idx) == 1);

  CHECK_THROWS_AS(geossl::subsample_labels(manifest, split, 0.0, 9), geossl::Error);
  CHECK_THROWS_AS(geossl::subsample_labels(manifest, split, 1.5, 9), geossl::Error);
  fs::remove_all(root);
}

TEST_CASE("140-strong class keeps 14 at fraction 0.1") {
  DatasetManifest m;
  m.dataset_id = "wide";
  m.classes = {"a"};
  for (int i = 0; i < 200; ++i) m.samples.emplace_back("i" + std::to_string(i) + ".png", 0);
  auto split = geossl::make_splits(m, {0.7, 0.2, 0.1}, 4);
  CHECK(split.indices_of(Split::kTrain).size() == 140);
  auto sub = geossl::subsample_labels(m, split, 0.1, 4);
  CHECK(sub.retained_train_indices().size() == 14);
}

TEST_CASE("splitspec CSV round-trip is byte-identical") {
  auto root = temp_dir("splitspec_rt");
  auto manifest = geossl::synth_dataset(small_params(), root, "spec");
  auto split = geossl::subsample_labels(
      manifest, geossl::make_splits(manifest, {0.7, 0.2, 0.1}, 8), 0.5, 8);
  auto p1 = root / "split1.csv";
  auto p2 = root / "split2.csv";
  geossl::write_splitspec_csv(split, manifest, p1);
  auto loaded = geossl::read_splitspec_csv(p1, manifest);
  CHECK(loaded.assignment == split.assignment);
  CHECK(loaded.retained == split.retained);
  CHECK(loaded.seed == split.seed);
  CHECK(loaded.label_fraction == split.label_fraction);
  geossl::write_splitspec_csv(loaded, manifest, p2);
  CHECK(slurp(p1) == slurp(p2));
  fs::remove_all(root);
}
