#include "geossl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

using json = nlohmann::json;

// ------------------------------------------------------------ SgdOptimizer

SgdOptimizer::SgdOptimizer(std::vector<nn::Param*> params, double lr, double momentum,
                           bool nesterov, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay), nesterov_(nesterov) {
  if (lr <= 0.0) raise(ErrorCode::ConfigError, "lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) raise(ErrorCode::ConfigError, "momentum out of range");
  if (weight_decay < 0.0) raise(ErrorCode::ConfigError, "weight_decay must be >= 0");
  for (auto* p : params) {
    slots_.push_back({p, std::vector<float>(p->value.data.size(), 0.0f)});
  }
}

void SgdOptimizer::step() {
  const float lr = static_cast<float>(lr_);
  const float mu = static_cast<float>(momentum_);
  const float wd = static_cast<float>(weight_decay_);
  for (auto& slot : slots_) {
    auto& value = slot.param->value.data;
    auto& grad = slot.param->grad.data;
    const bool decay = slot.param->decay && wd > 0.0f;
    for (std::size_t i = 0; i < value.size(); ++i) {
      float g = grad[i];
      if (decay) g += wd * value[i];
      float& v = slot.velocity[i];
      v = mu * v + g;
      value[i] -= lr * (nesterov_ ? g + mu * v : v);
    }
  }
}

// -------------------------------------------------------------- TrainLog

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorCode::IoError, "cannot open " + path.string());
  f << "epoch,loss,acc,wall_seconds\n";
  char buf[128];
  for (const auto& e : log.epochs) {
    if (e.has_eval) {
      std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.3f\n", e.epoch, e.loss, e.eval_accuracy,
                    e.wall_seconds);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.9g,,%.3f\n", e.epoch, e.loss, e.wall_seconds);
    }
    f << buf;
  }
}

void write_train_log_jsonl(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorCode::IoError, "cannot open " + path.string());
  for (const auto& e : log.epochs) {
    json j{{"event", "epoch"}, {"epoch", e.epoch}, {"loss", e.loss}, {"wall_seconds", e.wall_seconds}};
    if (e.has_eval) j["acc"] = e.eval_accuracy;
    f << j.dump() << "\n";
  }
  json done{{"event", "done"},
            {"total_wall_seconds", log.total_wall_seconds},
            {"seed", log.seed},
            {"config_digest", log.config_digest}};
  f << done.dump() << "\n";
}

// ----------------------------------------------------------- ChannelStats

ChannelStats compute_channel_stats(const DatasetManifest& manifest,
                                   const std::vector<std::size_t>& indices, int input_size) {
  if (indices.empty()) raise(ErrorCode::ConfigError, "channel stats need at least one image");
  std::array<double, 3> sum{0, 0, 0}, sq{0, 0, 0};
  std::int64_t count = 0;
  for (auto idx : indices) {
    auto img = load_image(manifest.samples[idx].first);
    Tensor t = downstream_transform(img, false, 0, input_size);
    const std::int64_t plane = t.dims[1] * t.dims[2];
    for (int c = 0; c < 3; ++c) {
      const float* p = t.ptr() + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum[static_cast<std::size_t>(c)] += p[i];
        sq[static_cast<std::size_t>(c)] += static_cast<double>(p[i]) * p[i];
      }
    }
    count += plane;
  }
  ChannelStats stats;
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[static_cast<std::size_t>(c)] / static_cast<double>(count);
    double var = sq[static_cast<std::size_t>(c)] / static_cast<double>(count) - mean * mean;
    if (var < 0.0) var = 0.0;
    stats.mean[static_cast<std::size_t>(c)] = mean;
    stats.stddev[static_cast<std::size_t>(c)] = std::max(1e-6, std::sqrt(var));
  }
  return stats;
}

namespace {

std::vector<ImageSample> load_samples(const DatasetManifest& manifest,
                                      const std::vector<std::size_t>& indices) {
  std::vector<ImageSample> out;
  out.reserve(indices.size());
  for (auto idx : indices) out.push_back(load_image(manifest.samples[idx].first));
  return out;
}

// Softmax cross-entropy over logit rows; fills d_logits with the mean-loss
// gradient and returns the mean loss. Scores, when wanted, receive the
// softmax rows.
double softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor& d_logits,
                    std::vector<double>* scores_out) {
  const std::int64_t N = logits.dims[0], C = logits.dims[1];
  d_logits = Tensor(logits.dims);
  double total = 0.0;
  for (std::int64_t n = 0; n < N; ++n) {
    const float* row = logits.ptr() + n * C;
    double mx = row[0];
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double denom = 0.0;
    for (std::int64_t c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
    const int y = labels[static_cast<std::size_t>(n)];
    total += -(row[y] - mx - std::log(denom));
    for (std::int64_t c = 0; c < C; ++c) {
      const double p = std::exp(row[c] - mx) / denom;
      if (scores_out) scores_out->push_back(p);
      d_logits.data[static_cast<std::size_t>(n * C + c)] =
          static_cast<float>((p - (c == y ? 1.0 : 0.0)) / static_cast<double>(N));
    }
  }
  return total / static_cast<double>(N);
}

Tensor stack_batch(const std::vector<Tensor>& items) {
  const auto& d = items.front().dims;
  Tensor out({static_cast<std::int64_t>(items.size()), d[0], d[1], d[2]});
  const std::int64_t stride = d[0] * d[1] * d[2];
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].data.begin(), items[i].data.end(),
              out.data.begin() + static_cast<std::int64_t>(i) * stride);
  }
  return out;
}

}  // namespace

// --------------------------------------------------------------- pretrain

PretrainResult pretrain(const DatasetManifest& manifest, const SplitSpec& split,
                        const AugmentationConfig& aug, const EncoderConfig& enc,
                        const ProjectionHeadConfig& proj, const PretextHyperparams& hp,
                        const std::filesystem::path& checkpoint_dir) {
  auto aug_errors = validate_config(aug);
  if (!aug_errors.empty()) raise(ErrorCode::ConfigError, "augmentation: " + aug_errors.front());
  validate(enc);
  validate(proj);
  if (hp.epochs <= 0) raise(ErrorCode::ConfigError, "epochs must be > 0");
  if (hp.batch_size < 2) raise(ErrorCode::ConfigError, "pretext batch_size must be >= 2");

  auto train_indices = split.indices_of(Split::kTrain);
  if (train_indices.empty()) raise(ErrorCode::ConfigError, "train split is empty");
  if (static_cast<std::size_t>(hp.batch_size) > train_indices.size()) {
    raise(ErrorCode::ConfigError,
          "batch_size " + std::to_string(hp.batch_size) + " exceeds train split size " +
              std::to_string(train_indices.size()));
  }

  const auto t_start = std::chrono::steady_clock::now();
  ChannelStats stats = compute_channel_stats(manifest, train_indices, enc.input_size);
  auto images = load_samples(manifest, train_indices);

  PretextModel model(enc, proj, hp.seed);
  SgdOptimizer opt(model.trainable_params(), hp.lr, hp.momentum, hp.nesterov, hp.weight_decay);

  AugmentationConfig view_cfg = aug;
  view_cfg.resize_height = enc.input_size;
  view_cfg.resize_width = enc.input_size;

  TrainLog log;
  log.seed = hp.seed;
  log.config_digest = model_config_digest(enc, &proj, nullptr);

  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

  const int N = hp.batch_size;
  const std::size_t steps = images.size() / static_cast<std::size_t>(N);
  PretrainResult result;
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(hp.seed, {"order", std::to_string(epoch)}));
    order_rng.shuffle(order);
    const std::uint64_t aug_seed = derive_seed(hp.seed, {"aug", std::to_string(epoch)});

    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<Tensor> views(static_cast<std::size_t>(2 * N));
      for (int i = 0; i < N; ++i) {
        const std::size_t slot = order[step * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)];
        auto pair = pretext_views(images[slot], view_cfg, aug_seed, train_indices[slot]);
        views[static_cast<std::size_t>(i)] = std::move(pair.view_a);
        views[static_cast<std::size_t>(N + i)] = std::move(pair.view_b);
      }
      Tensor batch = stack_batch(views);
      normalize_inplace(batch, stats);

      Tensor z = model.forward(batch, true);
      const std::int64_t P = z.dims[1];
      ProjectionBatch pb;
      pb.N = N;
      pb.tau = hp.temperature;
      pb.Z.resize(2 * N, P);
      for (std::int64_t r = 0; r < 2 * N; ++r)
        for (std::int64_t c = 0; c < P; ++c) pb.Z(r, c) = z.data[static_cast<std::size_t>(r * P + c)];

      LossValue loss = nt_xent_batch_loss(pb, hp.normalization);
      loss_sum += loss.value;

      Eigen::MatrixXd dZ = nt_xent_gradient(pb, hp.normalization);
      Tensor dz({2 * N, P});
      for (std::int64_t r = 0; r < 2 * N; ++r)
        for (std::int64_t c = 0; c < P; ++c)
          dz.data[static_cast<std::size_t>(r * P + c)] = static_cast<float>(dZ(r, c));

      model.zero_grads();
      model.backward(dz);
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(steps);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    log.epochs.push_back(rec);

    result.checkpoint = model.make_checkpoint(stats, manifest.dataset_id, hp.seed, epoch);
    if (!checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d", epoch);
      save_checkpoint(result.checkpoint, checkpoint_dir / name);
      save_checkpoint(result.checkpoint, checkpoint_dir / "checkpoint");
    }
  }
  log.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.log = std::move(log);
  return result;
}

// -------------------------------------------------------- train_downstream

EvalOutput eval_downstream(DownstreamModel& model, const DatasetManifest& manifest,
                           const std::vector<std::size_t>& indices, int batch_size) {
  EvalOutput out;
  const int S = model.encoder_config().input_size;
  const std::int64_t C = model.head_config().num_classes;
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Tensor> items;
    for (std::size_t i = start; i < end; ++i) {
      auto img = load_image(manifest.samples[indices[i]].first);
      items.push_back(downstream_transform(img, false, 0, S));
      out.truth.push_back(manifest.samples[indices[i]].second);
    }
    Tensor batch = stack_batch(items);
    normalize_inplace(batch, model.normalization());
    Tensor logits = model.forward(batch, false);
    for (std::int64_t n = 0; n < logits.dims[0]; ++n) {
      const float* row = logits.ptr() + n * C;
      double mx = row[0];
      int arg = 0;
      for (std::int64_t c = 1; c < C; ++c) {
        if (row[c] > mx) {
          mx = row[c];
          arg = static_cast<int>(c);
        }
      }
      out.pred.push_back(arg);
      double denom = 0.0;
      for (std::int64_t c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
      for (std::int64_t c = 0; c < C; ++c) out.scores.push_back(std::exp(row[c] - mx) / denom);
    }
  }
  return out;
}

DownstreamResult train_downstream(const DatasetManifest& manifest, const SplitSpec& split,
                                  const Checkpoint* init, DownstreamMode mode,
                                  const EncoderConfig& enc, const ClassifierHeadConfig& cls,
                                  const DownstreamHyperparams& hp) {
  validate(enc);
  validate(cls);
  if (hp.epochs <= 0) raise(ErrorCode::ConfigError, "epochs must be > 0");
  if (hp.batch_size < 1) raise(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (cls.num_classes != manifest.num_classes()) {
    raise(ErrorCode::ConfigError, "classifier expects " + std::to_string(cls.num_classes) +
                                      " classes but manifest has " +
                                      std::to_string(manifest.num_classes()));
  }

  auto retained = split.retained_train_indices();
  if (retained.empty()) raise(ErrorCode::ConfigError, "retained train set is empty");
  {
    // Guard the spec's stratification promise: every class keeps a member.
    std::vector<int> seen(static_cast<std::size_t>(manifest.num_classes()), 0);
    for (auto idx : retained) seen[static_cast<std::size_t>(manifest.samples[idx].second)] = 1;
    for (int c = 0; c < manifest.num_classes(); ++c) {
      if (!seen[static_cast<std::size_t>(c)]) {
        raise(ErrorCode::StratificationError,
              "class " + manifest.classes[static_cast<std::size_t>(c)] + " absent from retained train set");
      }
    }
  }

  const auto t_start = std::chrono::steady_clock::now();
  DownstreamResult result;
  auto model = std::make_unique<DownstreamModel>(enc, cls, hp.seed, mode);
  if (init) {
    model->load_encoder_from(*init);
  } else {
    model->set_normalization(compute_channel_stats(manifest, retained, enc.input_size));
  }

  SgdOptimizer opt(model->trainable_params(), hp.lr, hp.momentum, hp.nesterov, hp.weight_decay);
  auto images = load_samples(manifest, retained);
  auto test_indices = split.indices_of(Split::kTest);

  TrainLog log;
  log.seed = hp.seed;
  log.config_digest = model_config_digest(enc, nullptr, &cls);

  const int S = enc.input_size;
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(hp.seed, {"ds_order", std::to_string(epoch)}));
    order_rng.shuffle(order);
    const std::uint64_t crop_seed = derive_seed(hp.seed, {"ds_crop", std::to_string(epoch)});

    double loss_sum = 0.0;
    std::size_t step_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      std::vector<Tensor> items;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t slot = order[i];
        const std::size_t sample_idx = retained[slot];
        items.push_back(downstream_transform(images[slot], true, crop_seed, S, sample_idx));
        labels.push_back(manifest.samples[sample_idx].second);
        result.train_indices_used.push_back(sample_idx);
      }
      Tensor batch = stack_batch(items);
      normalize_inplace(batch, model->normalization());
      Tensor logits = model->forward(batch, true);
      Tensor d_logits;
      loss_sum += softmax_xent(logits, labels, d_logits, nullptr);
      ++step_count;
      model->zero_grads();
      model->backward(d_logits);
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(step_count);
    auto eval = eval_downstream(*model, manifest, test_indices, hp.batch_size);
    rec.eval_accuracy = accuracy(confusion(eval.pred, eval.truth, cls.num_classes));
    rec.has_eval = true;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    log.epochs.push_back(rec);
  }

  auto eval = eval_downstream(*model, manifest, test_indices, hp.batch_size);
  result.report = evaluate(eval.pred, eval.truth, cls.num_classes, eval.scores);
  log.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  std::sort(result.train_indices_used.begin(), result.train_indices_used.end());
  result.train_indices_used.erase(
      std::unique(result.train_indices_used.begin(), result.train_indices_used.end()),
      result.train_indices_used.end());
  result.log = std::move(log);
  result.model = std::move(model);
  return result;
}

}  // namespace geossl
