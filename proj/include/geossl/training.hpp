#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geossl/augment.hpp"
#include "geossl/contrastive.hpp"
#include "geossl/dataset.hpp"
#include "geossl/metrics.hpp"
#include "geossl/models.hpp"
#include "geossl/splits.hpp"

namespace geossl {

struct PretextHyperparams {
  int batch_size = 256;
  double lr = 0.0005;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0005;
  int epochs = 100;
  std::uint64_t seed = 0;
  double temperature = 0.5;
  LossNormalization normalization = LossNormalization::kMeanOverPairs;
};

/// The published tables leave these unstated; defaults are ours and every
/// field is config-overridable.
struct DownstreamHyperparams {
  int batch_size = 64;
  double lr = 0.001;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0005;
  int epochs = 30;
  std::uint64_t seed = 0;
};

/// SGD with momentum; weight decay applies only to params flagged decay
/// (convolution/linear weights — never biases or batch-norm affine terms).
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<nn::Param*> params, double lr, double momentum, bool nesterov,
               double weight_decay);
  void step();

 private:
  struct Slot {
    nn::Param* param;
    std::vector<float> velocity;
  };
  std::vector<Slot> slots_;
  double lr_, momentum_, weight_decay_;
  bool nesterov_;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, contiguous
  double loss = 0.0;
  double eval_accuracy = 0.0;
  bool has_eval = false;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::uint64_t seed = 0;
  std::string config_digest;
  double total_wall_seconds = 0.0;
};

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);
void write_train_log_jsonl(const TrainLog& log, const std::filesystem::path& path);

/// Per-channel mean/stddev over plain-resized images at the given indices.
ChannelStats compute_channel_stats(const DatasetManifest& manifest,
                                   const std::vector<std::size_t>& indices, int input_size);

struct PretrainResult {
  Checkpoint checkpoint;  // final-epoch snapshot
  TrainLog log;
};

/// Contrastive pretext training. Batches are fixed-size (the trailing
/// partial batch is dropped); a checkpoint lands in checkpoint_dir at every
/// epoch end when the directory is given.
PretrainResult pretrain(const DatasetManifest& manifest, const SplitSpec& split,
                        const AugmentationConfig& aug, const EncoderConfig& enc,
                        const ProjectionHeadConfig& proj, const PretextHyperparams& hp,
                        const std::filesystem::path& checkpoint_dir = {});

struct DownstreamResult {
  std::unique_ptr<DownstreamModel> model;
  TrainLog log;
  MetricsReport report;                        // test-split evaluation
  std::vector<std::size_t> train_indices_used; // leakage audit trail
};

/// Supervised downstream training on the retained train indices only,
/// evaluated on the test split. `init` carries pretext weights; absent
/// means a randomly initialized (scratch) encoder.
DownstreamResult train_downstream(const DatasetManifest& manifest, const SplitSpec& split,
                                  const Checkpoint* init, DownstreamMode mode,
                                  const EncoderConfig& enc, const ClassifierHeadConfig& cls,
                                  const DownstreamHyperparams& hp);

struct EvalOutput {
  std::vector<int> pred;
  std::vector<int> truth;
  std::vector<double> scores;  // row-major n×C softmax probabilities
};

EvalOutput eval_downstream(DownstreamModel& model, const DatasetManifest& manifest,
                           const std::vector<std::size_t>& indices, int batch_size = 64);

}  // namespace geossl
