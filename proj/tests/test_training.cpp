#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"
#include "geossl/training.hpp"

namespace fs = std::filesystem;
using geossl::AugmentationConfig;
using geossl::ClassifierHeadConfig;
using geossl::DatasetManifest;
using geossl::DownstreamHyperparams;
using geossl::DownstreamMode;
using geossl::EncoderConfig;
using geossl::PretextHyperparams;
using geossl::ProjectionHeadConfig;
using geossl::Split;
using geossl::SplitSpec;
using geossl::Tensor;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("geossl_train_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Fixture {
  fs::path root;
  DatasetManifest manifest;
  SplitSpec split;
};

Fixture make_fixture(const std::string& tag, int per_class = 10, int image_size = 32) {
  Fixture fx;
  fx.root = temp_dir(tag);
  geossl::SynthParams p;
  p.num_classes = 4;
  p.per_class = per_class;
  p.image_size = image_size;
  p.seed = 17;
  fx.manifest = geossl::synth_dataset(p, fx.root, "fix_" + tag);
  fx.split = geossl::make_splits(fx.manifest, {0.7, 0.2, 0.1}, 3);
  return fx;
}

EncoderConfig tiny_encoder() {
  EncoderConfig enc;
  enc.backbone_id = "small_conv";
  enc.feature_dim = 16;
  enc.input_size = 32;
  return enc;
}

PretextHyperparams tiny_pretext(int epochs = 3, int batch = 16) {
  PretextHyperparams hp;
  hp.batch_size = batch;
  hp.epochs = epochs;
  hp.seed = 5;
  hp.lr = 0.01;
  return hp;
}

}  // namespace

TEST_CASE("sgd follows the nesterov momentum recurrence") {
  geossl::nn::Param p;
  p.value = Tensor({2});
  p.value.data = {1.0f, -2.0f};
  p.grad = Tensor({2});
  p.grad.data = {0.5f, 0.25f};
  geossl::SgdOptimizer opt({&p}, 0.1, 0.9, true, 0.0);
  // v = g; w -= lr * (g + mu*v)
  opt.step();
  CHECK(p.value.data[0] == doctest::Approx(1.0 - 0.1 * (0.5 + 0.9 * 0.5)));
  CHECK(p.value.data[1] == doctest::Approx(-2.0 - 0.1 * (0.25 + 0.9 * 0.25)));
  // second step with same grad: v = mu*v + g
  const double v0 = 0.5, v1 = 0.9 * v0 + 0.5;
  const double w_after_1 = 1.0 - 0.1 * (0.5 + 0.9 * v0);
  opt.step();
  CHECK(p.value.data[0] == doctest::Approx(w_after_1 - 0.1 * (0.5 + 0.9 * v1)));
}

TEST_CASE("weight decay touches only decay-flagged params") {
  geossl::nn::Param weight, bias;
  weight.value = Tensor({1});
  weight.value.data = {2.0f};
  weight.grad = Tensor({1});
  weight.decay = true;
  bias.value = Tensor({1});
  bias.value.data = {2.0f};
  bias.grad = Tensor({1});
  bias.decay = false;
  geossl::SgdOptimizer opt({&weight, &bias}, 0.1, 0.0, false, 0.5);
  opt.step();
  // weight: g = 0 + 0.5*2 = 1 -> w = 2 - 0.1 = 1.9; bias: untouched
  CHECK(weight.value.data[0] == doctest::Approx(1.9));
  CHECK(bias.value.data[0] == doctest::Approx(2.0));
}

TEST_CASE("channel stats recover a constant image exactly") {
  auto dir = temp_dir("stats");
  geossl::ImageSample img;
  img.height = 16;
  img.width = 16;
  img.pixels.assign(16 * 16 * 3, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      img.at(y, x, 0) = 255;  // channel means 1.0, 0.0, 127/255
      img.at(y, x, 1) = 0;
      img.at(y, x, 2) = 127;
    }
  fs::create_directories(dir / "c");
  geossl::save_png(img, dir / "c" / "one.png");
  auto manifest = geossl::scan_dataset(dir, "stats");
  auto stats = geossl::compute_channel_stats(manifest, {0}, 16);
  CHECK(stats.mean[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(stats.mean[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(stats.mean[2] == doctest::Approx(127.0 / 255.0).epsilon(1e-9));
  CHECK(stats.stddev[0] == doctest::Approx(1e-6));
  fs::remove_all(dir);
}

TEST_CASE("pretext loss decreases on synthetic data") {
  auto fx = make_fixture("pretrain_trend", 15);
  auto hp = tiny_pretext(5, 16);
  hp.lr = 0.02;
  auto result = geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, tiny_encoder(),
                                 ProjectionHeadConfig{.hidden_dim = 32, .out_dim = 16}, hp);
  REQUIRE(result.log.epochs.size() == 5);
  CHECK(result.log.epochs.back().loss < result.log.epochs.front().loss);
  for (std::size_t i = 0; i < result.log.epochs.size(); ++i) {
    CHECK(result.log.epochs[i].epoch == static_cast<int>(i) + 1);
  }
  CHECK(result.checkpoint.meta.kind == "pretext");
  CHECK(result.checkpoint.meta.epoch == 5);
  fs::remove_all(fx.root);
}

TEST_CASE("same seed reproduces the loss curve, different seed does not") {
  auto fx = make_fixture("pretrain_det", 8);
  ProjectionHeadConfig proj{.hidden_dim = 32, .out_dim = 16};
  auto a = geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, tiny_encoder(), proj,
                            tiny_pretext(2, 8));
  auto b = geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, tiny_encoder(), proj,
                            tiny_pretext(2, 8));
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    CHECK(a.log.epochs[i].loss == b.log.epochs[i].loss);
  }
  auto hp = tiny_pretext(2, 8);
  hp.seed = 6;
  auto c = geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, tiny_encoder(), proj, hp);
  CHECK(c.log.epochs[0].loss != a.log.epochs[0].loss);
  fs::remove_all(fx.root);
}

TEST_CASE("single-step pretext loss equals the contrastive core value") {
  auto fx = make_fixture("pretrain_hookup", 6);
  auto train = fx.split.indices_of(Split::kTrain);
  const int N = static_cast<int>(train.size());
  auto enc = tiny_encoder();
  ProjectionHeadConfig proj{.hidden_dim = 32, .out_dim = 16};
  PretextHyperparams hp = tiny_pretext(1, N);

  auto result = geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, enc, proj, hp);
  REQUIRE(result.log.epochs.size() == 1);

  // Rebuild the exact first batch: same order shuffle, same augmentation
  // keys, same stats, same weight init.
  auto stats = geossl::compute_channel_stats(fx.manifest, train, enc.input_size);
  geossl::PretextModel model(enc, proj, hp.seed);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  geossl::Rng order_rng(geossl::derive_seed(hp.seed, {"order", "1"}));
  order_rng.shuffle(order);
  const std::uint64_t aug_seed = geossl::derive_seed(hp.seed, {"aug", "1"});

  AugmentationConfig view_cfg;
  view_cfg.resize_height = enc.input_size;
  view_cfg.resize_width = enc.input_size;

  Tensor batch({2 * N, 3, enc.input_size, enc.input_size});
  const std::int64_t stride = 3LL * enc.input_size * enc.input_size;
  for (int i = 0; i < N; ++i) {
    auto img = geossl::load_image(fx.manifest.samples[train[order[static_cast<std::size_t>(i)]]].first);
    auto pair = geossl::pretext_views(img, view_cfg, aug_seed, train[order[static_cast<std::size_t>(i)]]);
    std::copy(pair.view_a.data.begin(), pair.view_a.data.end(),
              batch.data.begin() + i * stride);
    std::copy(pair.view_b.data.begin(), pair.view_b.data.end(),
              batch.data.begin() + (N + i) * stride);
  }
  geossl::normalize_inplace(batch, stats);
  Tensor z = model.forward(batch, true);
  geossl::ProjectionBatch pb;
  pb.N = N;
  pb.tau = hp.temperature;
  pb.Z.resize(2 * N, z.dims[1]);
  for (int r = 0; r < 2 * N; ++r)
    for (std::int64_t c = 0; c < z.dims[1]; ++c)
      pb.Z(r, c) = z.data[static_cast<std::size_t>(r * z.dims[1] + c)];
  auto loss = geossl::nt_xent_batch_loss(pb, hp.normalization);
  CHECK(result.log.epochs[0].loss == doctest::Approx(loss.value).epsilon(1e-6));
  fs::remove_all(fx.root);
}

TEST_CASE("pretrain rejects impossible configurations") {
  auto fx = make_fixture("pretrain_err", 6);
  ProjectionHeadConfig proj{.hidden_dim = 32, .out_dim = 16};

  auto hp = tiny_pretext(1, 500);  // larger than the train split
  try {
    geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, tiny_encoder(), proj, hp);
    CHECK(false);
  } catch (const geossl::Error& e) {
    CHECK(e.code() == geossl::ErrorCode::ConfigError);
  }

  SplitSpec empty_train = fx.split;
  for (auto& s : empty_train.assignment) s = Split::kTest;
  CHECK_THROWS_AS(geossl::pretrain(fx.manifest, empty_train, AugmentationConfig{}, tiny_encoder(),
                                   proj, tiny_pretext(1, 4)),
                  geossl::Error);
  fs::remove_all(fx.root);
}

TEST_CASE("pretrain writes per-epoch checkpoints") {
  auto fx = make_fixture("pretrain_ckpt", 6);
  auto out = temp_dir("pretrain_ckpt_out");
  ProjectionHeadConfig proj{.hidden_dim = 32, .out_dim = 16};
  geossl::pretrain(fx.manifest, fx.split, AugmentationConfig{}, tiny_encoder(), proj,
                   tiny_pretext(3, 8), out);
  CHECK(fs::exists(out / "checkpoint_epoch_0001"));
  CHECK(fs::exists(out / "checkpoint_epoch_0002"));
  CHECK(fs::exists(out / "checkpoint_epoch_0003"));
  CHECK(fs::exists(out / "checkpoint"));
  auto ckpt = geossl::load_checkpoint(out / "checkpoint");
  CHECK(ckpt.meta.epoch == 3);
  fs::remove_all(fx.root);
  fs::remove_all(out);
}

TEST_CASE("downstream trains only on retained indices and evaluates on test") {
  auto fx = make_fixture("down_leak", 10);
  auto sub = geossl::subsample_labels(fx.manifest, fx.split, 0.5, 9);
  ClassifierHeadConfig cls;
  cls.hidden_dim = 16;
  cls.num_classes = 4;
  DownstreamHyperparams hp;
  hp.epochs = 2;
  hp.batch_size = 8;
  hp.seed = 2;

  auto result = geossl::train_downstream(fx.manifest, sub, nullptr, DownstreamMode::kFinetune,
                                         tiny_encoder(), cls, hp);
  auto retained = sub.retained_train_indices();
  std::set<std::size_t> retained_set(retained.begin(), retained.end());
  CHECK(result.train_indices_used.size() == retained.size());
  for (auto idx : result.train_indices_used) CHECK(retained_set.count(idx) == 1);

  // Leakage: no test or val index was ever used for training.
  for (auto idx : sub.indices_of(Split::kTest)) CHECK(retained_set.count(idx) == 0);
  for (auto idx : sub.indices_of(Split::kVal)) CHECK(retained_set.count(idx) == 0);

  CHECK(result.report.n_samples ==
        static_cast<std::int64_t>(sub.indices_of(Split::kTest).size()));
  CHECK(result.report.has_auc);
  REQUIRE(result.log.epochs.size() == 2);
  CHECK(result.log.epochs[0].has_eval);
  fs::remove_all(fx.root);
}

TEST_CASE("downstream learns the synthetic classes from scratch") {
  auto fx = make_fixture("down_learn", 12);
  ClassifierHeadConfig cls;
  cls.hidden_dim = 32;
  cls.num_classes = 4;
  DownstreamHyperparams hp;
  hp.epochs = 8;
  hp.batch_size = 8;
  hp.lr = 0.005;
  hp.seed = 4;
  auto result = geossl::train_downstream(fx.manifest, fx.split, nullptr, DownstreamMode::kFinetune,
                                         tiny_encoder(), cls, hp);
  CHECK(result.report.accuracy > 0.5);  // 4 classes, chance = 0.25
  fs::remove_all(fx.root);
}

TEST_CASE("downstream configuration errors") {
  auto fx = make_fixture("down_err", 6);
  ClassifierHeadConfig wrong;
  wrong.hidden_dim = 16;
  wrong.num_classes = 7;  // manifest has 4
  DownstreamHyperparams hp;
  hp.epochs = 1;
  try {
    geossl::train_downstream(fx.manifest, fx.split, nullptr, DownstreamMode::kLinear,
                             tiny_encoder(), wrong, hp);
    CHECK(false);
  } catch (const geossl::Error& e) {
    CHECK(e.code() == geossl::ErrorCode::ConfigError);
  }
  fs::remove_all(fx.root);
}

TEST_CASE("train log serializers emit the documented shapes") {
  geossl::TrainLog log;
  log.seed = 9;
  log.config_digest = "abc123";
  geossl::EpochRecord e1{1, 2.5, 0.0, false, 0.25};
  geossl::EpochRecord e2{2, 1.5, 0.75, true, 0.75};
  log.epochs = {e1, e2};
  log.total_wall_seconds = 1.0;

  auto dir = temp_dir("trainlog");
  geossl::write_train_log_csv(log, dir / "log.csv");
  geossl::write_train_log_jsonl(log, dir / "log.jsonl");

  std::ifstream csv(dir / "log.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "epoch,loss,acc,wall_seconds");
  std::getline(csv, line);
  CHECK(line.rfind("1,2.5,,", 0) == 0);
  std::getline(csv, line);
  CHECK(line.rfind("2,1.5,0.75,", 0) == 0);

  std::ifstream jsonl(dir / "log.jsonl");
  int lines = 0;
  while (std::getline(jsonl, line)) {
    ++lines;
    CHECK(line.front() == '{');
    CHECK(line.back() == '}');
  }
  CHECK(lines == 3);  // 2 epochs + done event
  fs::remove_all(dir);
}
