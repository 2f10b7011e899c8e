#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "geossl/augment.hpp"
#include "geossl/layers.hpp"
#include "geossl/tensor.hpp"

namespace geossl {

struct EncoderConfig {
  std::string backbone_id = "small_conv";  // {resnet50 | small_conv}
  int feature_dim = 128;                   // 2048 for resnet50
  int input_size = 224;
};

struct ProjectionHeadConfig {
  int hidden_dim = 2048;
  int out_dim = 1024;
};

struct ClassifierHeadConfig {
  int hidden_dim = 512;
  int num_classes = 2;
};

void validate(const EncoderConfig& cfg);
void validate(const ProjectionHeadConfig& cfg);
void validate(const ClassifierHeadConfig& cfg);

/// Backbone network ending in global average pooling, so forward maps
/// [N,3,H,W] to [N, feature_dim]. `cam_tap` indexes the layer whose output
/// is the final convolutional feature map (the default layer used for class
/// activation maps).
struct Encoder {
  nn::Sequential net;
  EncoderConfig config;
  int cam_tap = -1;
};

Encoder build_encoder(const EncoderConfig& cfg, Rng& rng);

/// Digest of the architectural configuration, embedded in checkpoints so a
/// loader can reject mismatched weights early.
std::string model_config_digest(const EncoderConfig& enc, const ProjectionHeadConfig* proj,
                                const ClassifierHeadConfig* cls);

// ------------------------------------------------------------- Checkpoint

struct CheckpointMeta {
  int format_version = 1;
  std::string kind;  // "pretext" | "downstream"
  EncoderConfig encoder;
  ProjectionHeadConfig projection;  // meaningful when kind == "pretext"
  ClassifierHeadConfig classifier;  // meaningful when kind == "downstream"
  ChannelStats normalization;
  std::string source_dataset;
  std::uint64_t seed = 0;
  int epoch = 0;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;  // serialization order

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ----------------------------------------------------------- PretextModel

/// Encoder plus the two-layer projection head; forward yields the
/// projections the contrastive loss consumes (pairing is the caller's job).
class PretextModel {
 public:
  PretextModel(const EncoderConfig& enc, const ProjectionHeadConfig& proj, std::uint64_t seed);

  Tensor forward(const Tensor& batch, bool train);
  Tensor backward(const Tensor& d_projections);

  std::vector<nn::Param*> trainable_params();
  void zero_grads();
  std::int64_t parameter_count();

  Encoder& encoder() { return encoder_; }
  const EncoderConfig& encoder_config() const { return encoder_.config; }
  const ProjectionHeadConfig& head_config() const { return head_config_; }

  /// Full weight snapshot (encoder.* and projection.* tensors, copied).
  Checkpoint make_checkpoint(const ChannelStats& stats, const std::string& source_dataset,
                             std::uint64_t seed, int epoch);
  void collect_state(std::vector<nn::TensorRef>& out);

 private:
  Encoder encoder_;
  nn::Sequential head_;
  ProjectionHeadConfig head_config_;
};

// -------------------------------------------------------- DownstreamModel

enum class DownstreamMode { kLinear, kFinetune };

const char* mode_name(DownstreamMode m);
DownstreamMode mode_from_name(const std::string& name);

/// Encoder plus classifier head (feature_dim -> hidden -> num_classes).
/// Linear mode freezes the encoder: its parameters never receive gradients
/// and batch norm stays in inference statistics mode.
class DownstreamModel {
 public:
  DownstreamModel(const EncoderConfig& enc, const ClassifierHeadConfig& cls, std::uint64_t seed,
                  DownstreamMode mode);

  Tensor forward(const Tensor& batch, bool train);
  /// force_encoder pushes gradients through a frozen encoder anyway —
  /// activation maps need d(loss)/d(feature map) even in linear mode;
  /// parameter updates still never touch frozen weights.
  Tensor backward(const Tensor& d_logits, bool force_encoder = false);

  std::vector<nn::Param*> trainable_params();
  void zero_grads();
  std::int64_t parameter_count();

  /// Copies encoder weights (and normalization stats) out of a checkpoint;
  /// projection/classifier tensors in it are ignored.
  void load_encoder_from(const Checkpoint& ckpt);

  Encoder& encoder() { return encoder_; }
  const EncoderConfig& encoder_config() const { return encoder_.config; }
  const ClassifierHeadConfig& head_config() const { return head_config_; }
  DownstreamMode mode() const { return mode_; }
  const ChannelStats& normalization() const { return stats_; }
  void set_normalization(const ChannelStats& stats) { stats_ = stats; }

  Checkpoint make_checkpoint(const std::string& source_dataset, std::uint64_t seed, int epoch);
  void collect_state(std::vector<nn::TensorRef>& out);

 private:
  Encoder encoder_;
  nn::Sequential head_;
  ClassifierHeadConfig head_config_;
  DownstreamMode mode_;
  ChannelStats stats_;
};

/// Rebuilds a downstream model exactly as a downstream checkpoint describes
/// it (architecture, weights, normalization stats).
std::unique_ptr<DownstreamModel> downstream_from_checkpoint(const Checkpoint& ckpt,
                                                            DownstreamMode mode);

}  // namespace geossl
