#include "geossl/models.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

using json = nlohmann::json;
using nn::BatchNorm2d;
using nn::Bottleneck;
using nn::Conv2d;
using nn::GlobalAvgPool;
using nn::Linear;
using nn::MaxPool2d;
using nn::ReLU;
using nn::Sequential;

void validate(const EncoderConfig& cfg) {
  if (cfg.backbone_id != "resnet50" && cfg.backbone_id != "small_conv") {
    raise(ErrorCode::ConfigError, "unknown backbone_id: " + cfg.backbone_id);
  }
  if (cfg.feature_dim <= 0) raise(ErrorCode::ConfigError, "feature_dim must be > 0");
  if (cfg.backbone_id == "resnet50" && cfg.feature_dim != 2048) {
    raise(ErrorCode::ConfigError, "resnet50 feature_dim is fixed at 2048");
  }
  if (cfg.backbone_id == "small_conv" && cfg.feature_dim % 8 != 0) {
    raise(ErrorCode::ConfigError, "small_conv feature_dim must be divisible by 8");
  }
  if (cfg.input_size < 16) raise(ErrorCode::ConfigError, "input_size must be >= 16");
}

void validate(const ProjectionHeadConfig& cfg) {
  if (cfg.hidden_dim <= 0 || cfg.out_dim <= 0) {
    raise(ErrorCode::ConfigError, "projection head dims must be > 0");
  }
}

void validate(const ClassifierHeadConfig& cfg) {
  if (cfg.hidden_dim <= 0) raise(ErrorCode::ConfigError, "classifier hidden_dim must be > 0");
  if (cfg.num_classes < 2) raise(ErrorCode::ConfigError, "num_classes must be >= 2");
}

namespace {

Encoder build_small_conv(const EncoderConfig& cfg, Rng& rng) {
  Encoder enc;
  enc.config = cfg;
  const int F = cfg.feature_dim;
  int in_c = 3;
  const int widths[4] = {F / 8, F / 4, F / 2, F};
  for (int b = 0; b < 4; ++b) {
    const std::string block = "block" + std::to_string(b + 1);
    enc.net.append(block + ".conv", std::make_unique<Conv2d>(in_c, widths[b], 3, 1, 1, false, rng));
    enc.net.append(block + ".bn", std::make_unique<BatchNorm2d>(widths[b]));
    enc.net.append(block + ".relu", std::make_unique<ReLU>());
    enc.net.append(block + ".pool", std::make_unique<MaxPool2d>(2, 2));
    in_c = widths[b];
  }
  // Final conv feature map = last ReLU, before the pool halves it again.
  enc.cam_tap = 4 * 3 + 2;
  enc.net.append("gap", std::make_unique<GlobalAvgPool>());
  return enc;
}

Encoder build_resnet50(const EncoderConfig& cfg, Rng& rng) {
  Encoder enc;
  enc.config = cfg;
  enc.net.append("conv1", std::make_unique<Conv2d>(3, 64, 7, 2, 3, false, rng));
  enc.net.append("bn1", std::make_unique<BatchNorm2d>(64));
  enc.net.append("relu", std::make_unique<ReLU>());
  enc.net.append("maxpool", std::make_unique<MaxPool2d>(3, 2, 1));
  const int blocks[4] = {3, 4, 6, 3};
  const int mids[4] = {64, 128, 256, 512};
  int in_c = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int out_c = mids[stage] * 4;
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (b == 0 && stage > 0) ? 2 : 1;
      enc.net.append("layer" + std::to_string(stage + 1) + "." + std::to_string(b),
                     std::make_unique<Bottleneck>(in_c, mids[stage], out_c, stride, rng));
      in_c = out_c;
    }
  }
  enc.cam_tap = static_cast<int>(enc.net.size()) - 1;  // layer4.2 output
  enc.net.append("gap", std::make_unique<GlobalAvgPool>());
  return enc;
}

json encoder_to_json(const EncoderConfig& cfg) {
  return json{{"backbone_id", cfg.backbone_id},
              {"feature_dim", cfg.feature_dim},
              {"input_size", cfg.input_size}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.backbone_id = j.at("backbone_id").get<std::string>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.input_size = j.at("input_size").get<int>();
  return cfg;
}

Sequential build_projection_head(int feature_dim, const ProjectionHeadConfig& cfg, Rng& rng) {
  Sequential head;
  head.append("0", std::make_unique<Linear>(feature_dim, cfg.hidden_dim, true, rng));
  head.append("1", std::make_unique<ReLU>());
  head.append("2", std::make_unique<Linear>(cfg.hidden_dim, cfg.out_dim, true, rng));
  return head;
}

Sequential build_classifier_head(int feature_dim, const ClassifierHeadConfig& cfg, Rng& rng) {
  Sequential head;
  head.append("0", std::make_unique<Linear>(feature_dim, cfg.hidden_dim, true, rng));
  head.append("1", std::make_unique<ReLU>());
  head.append("2", std::make_unique<Linear>(cfg.hidden_dim, cfg.num_classes, true, rng));
  return head;
}

}  // namespace

Encoder build_encoder(const EncoderConfig& cfg, Rng& rng) {
  validate(cfg);
  return cfg.backbone_id == "resnet50" ? build_resnet50(cfg, rng) : build_small_conv(cfg, rng);
}

std::string model_config_digest(const EncoderConfig& enc, const ProjectionHeadConfig* proj,
                                const ClassifierHeadConfig* cls) {
  json j{{"encoder", encoder_to_json(enc)}};
  if (proj) j["projection"] = {{"hidden_dim", proj->hidden_dim}, {"out_dim", proj->out_dim}};
  if (cls) j["classifier"] = {{"hidden_dim", cls->hidden_dim}, {"num_classes", cls->num_classes}};
  return to_hex(fnv1a64(j.dump()));
}

// ------------------------------------------------------------- Checkpoint

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

constexpr char kMagic[4] = {'G', 'S', 'S', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

json meta_to_json(const Checkpoint& ckpt) {
  const auto& m = ckpt.meta;
  json j;
  j["format_version"] = m.format_version;
  j["kind"] = m.kind;
  j["encoder"] = encoder_to_json(m.encoder);
  if (m.kind == "pretext") {
    j["projection"] = {{"hidden_dim", m.projection.hidden_dim}, {"out_dim", m.projection.out_dim}};
    j["config_digest"] = model_config_digest(m.encoder, &m.projection, nullptr);
  } else {
    j["classifier"] = {{"hidden_dim", m.classifier.hidden_dim},
                       {"num_classes", m.classifier.num_classes}};
    j["config_digest"] = model_config_digest(m.encoder, nullptr, &m.classifier);
  }
  j["normalization"] = {{"mean", m.normalization.mean}, {"stddev", m.normalization.stddev}};
  j["provenance"] = {{"source_dataset", m.source_dataset}, {"seed", m.seed}, {"epoch", m.epoch}};
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    tensors.push_back({{"name", name}, {"dims", t.dims}});
  }
  j["tensors"] = tensors;
  return j;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string header = meta_to_json(ckpt).dump();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorCode::IoError, "cannot open " + tmp.string());
    f.write(kMagic, 4);
    const std::uint32_t version = kFormatVersion;
    f.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = header.size();
    f.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      f.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!f) raise(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::IoError, "rename failed for " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorCode::NotFound, "checkpoint not found: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    raise(ErrorCode::FormatError, "not a checkpoint file: " + path.string());
  }
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!f) raise(ErrorCode::FormatError, "truncated checkpoint header: " + path.string());
  if (version != kFormatVersion) {
    raise(ErrorCode::VersionError,
          "unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  std::uint64_t header_len = 0;
  f.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!f || header_len == 0 || header_len > (1ull << 30)) {
    raise(ErrorCode::FormatError, "bad header length in " + path.string());
  }
  std::string header(header_len, '\0');
  f.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!f) raise(ErrorCode::FormatError, "truncated checkpoint header: " + path.string());

  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError, "corrupt checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  try {
    auto& m = ckpt.meta;
    m.format_version = j.at("format_version").get<int>();
    m.kind = j.at("kind").get<std::string>();
    m.encoder = encoder_from_json(j.at("encoder"));
    if (j.contains("projection")) {
      m.projection.hidden_dim = j["projection"].at("hidden_dim").get<int>();
      m.projection.out_dim = j["projection"].at("out_dim").get<int>();
    }
    if (j.contains("classifier")) {
      m.classifier.hidden_dim = j["classifier"].at("hidden_dim").get<int>();
      m.classifier.num_classes = j["classifier"].at("num_classes").get<int>();
    }
    m.normalization.mean = j.at("normalization").at("mean").get<std::array<double, 3>>();
    m.normalization.stddev = j.at("normalization").at("stddev").get<std::array<double, 3>>();
    m.source_dataset = j.at("provenance").at("source_dataset").get<std::string>();
    m.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    m.epoch = j.at("provenance").at("epoch").get<int>();
    for (const auto& tj : j.at("tensors")) {
      Tensor t(tj.at("dims").get<std::vector<std::int64_t>>());
      ckpt.tensors.emplace_back(tj.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError, "checkpoint header schema violation: " + std::string(e.what()));
  }

  for (auto& [name, t] : ckpt.tensors) {
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!f) raise(ErrorCode::FormatError, "truncated tensor data for " + name);
  }
  return ckpt;
}

// ----------------------------------------------------------- PretextModel

PretextModel::PretextModel(const EncoderConfig& enc, const ProjectionHeadConfig& proj,
                           std::uint64_t seed)
    : head_config_(proj) {
  validate(enc);
  validate(proj);
  Rng enc_rng(derive_seed(seed, {"init", "encoder"}));
  encoder_ = build_encoder(enc, enc_rng);
  Rng head_rng(derive_seed(seed, {"init", "projection"}));
  head_ = build_projection_head(enc.feature_dim, proj, head_rng);
}

Tensor PretextModel::forward(const Tensor& batch, bool train) {
  return head_.forward(encoder_.net.forward(batch, train), train);
}

Tensor PretextModel::backward(const Tensor& d_projections) {
  return encoder_.net.backward(head_.backward(d_projections));
}

std::vector<nn::Param*> PretextModel::trainable_params() {
  std::vector<nn::Param*> params;
  encoder_.net.collect_params(params);
  head_.collect_params(params);
  return params;
}

void PretextModel::zero_grads() {
  for (auto* p : trainable_params()) p->grad.fill(0.0f);
}

std::int64_t PretextModel::parameter_count() {
  std::int64_t n = 0;
  for (auto* p : trainable_params()) n += p->value.numel();
  return n;
}

void PretextModel::collect_state(std::vector<nn::TensorRef>& out) {
  encoder_.net.collect_state("encoder.", out);
  head_.collect_state("projection.", out);
}

Checkpoint PretextModel::make_checkpoint(const ChannelStats& stats,
                                         const std::string& source_dataset, std::uint64_t seed,
                                         int epoch) {
  Checkpoint ckpt;
  ckpt.meta.kind = "pretext";
  ckpt.meta.encoder = encoder_.config;
  ckpt.meta.projection = head_config_;
  ckpt.meta.normalization = stats;
  ckpt.meta.source_dataset = source_dataset;
  ckpt.meta.seed = seed;
  ckpt.meta.epoch = epoch;
  std::vector<nn::TensorRef> refs;
  collect_state(refs);
  for (auto& r : refs) ckpt.tensors.emplace_back(r.name, *r.tensor);
  return ckpt;
}

// -------------------------------------------------------- DownstreamModel

const char* mode_name(DownstreamMode m) {
  return m == DownstreamMode::kLinear ? "linear" : "finetune";
}

DownstreamMode mode_from_name(const std::string& name) {
  if (name == "linear") return DownstreamMode::kLinear;
  if (name == "finetune") return DownstreamMode::kFinetune;
  raise(ErrorCode::ConfigError, "unknown downstream mode: " + name);
}

DownstreamModel::DownstreamModel(const EncoderConfig& enc, const ClassifierHeadConfig& cls,
                                 std::uint64_t seed, DownstreamMode mode)
    : head_config_(cls), mode_(mode) {
  validate(enc);
  validate(cls);
  Rng enc_rng(derive_seed(seed, {"init", "encoder"}));
  encoder_ = build_encoder(enc, enc_rng);
  Rng head_rng(derive_seed(seed, {"init", "classifier"}));
  head_ = build_classifier_head(enc.feature_dim, cls, head_rng);
}

Tensor DownstreamModel::forward(const Tensor& batch, bool train) {
  const bool encoder_train = train && mode_ == DownstreamMode::kFinetune;
  return head_.forward(encoder_.net.forward(batch, encoder_train), train);
}

Tensor DownstreamModel::backward(const Tensor& d_logits, bool force_encoder) {
  Tensor g = head_.backward(d_logits);
  if (mode_ == DownstreamMode::kFinetune || force_encoder) {
    return encoder_.net.backward(g);
  }
  return g;
}

std::vector<nn::Param*> DownstreamModel::trainable_params() {
  std::vector<nn::Param*> params;
  if (mode_ == DownstreamMode::kFinetune) encoder_.net.collect_params(params);
  head_.collect_params(params);
  return params;
}

void DownstreamModel::zero_grads() {
  std::vector<nn::Param*> params;
  encoder_.net.collect_params(params);
  head_.collect_params(params);
  for (auto* p : params) p->grad.fill(0.0f);
}

std::int64_t DownstreamModel::parameter_count() {
  std::vector<nn::Param*> params;
  encoder_.net.collect_params(params);
  head_.collect_params(params);
  std::int64_t n = 0;
  for (auto* p : params) n += p->value.numel();
  return n;
}

void DownstreamModel::load_encoder_from(const Checkpoint& ckpt) {
  if (ckpt.meta.encoder.backbone_id != encoder_.config.backbone_id ||
      ckpt.meta.encoder.feature_dim != encoder_.config.feature_dim) {
    raise(ErrorCode::CheckpointIncompatible,
          "checkpoint encoder (" + ckpt.meta.encoder.backbone_id + ", feature_dim " +
              std::to_string(ckpt.meta.encoder.feature_dim) + ") does not match model (" +
              encoder_.config.backbone_id + ", feature_dim " +
              std::to_string(encoder_.config.feature_dim) + ")");
  }
  std::vector<nn::TensorRef> refs;
  encoder_.net.collect_state("encoder.", refs);
  for (auto& r : refs) {
    const Tensor* src = ckpt.find(r.name);
    if (!src) raise(ErrorCode::CheckpointIncompatible, "checkpoint missing tensor " + r.name);
    if (src->dims != r.tensor->dims) {
      raise(ErrorCode::CheckpointIncompatible, "shape mismatch for " + r.name + ": checkpoint " +
                                                   src->shape_str() + " vs model " +
                                                   r.tensor->shape_str());
    }
    *r.tensor = *src;
  }
  stats_ = ckpt.meta.normalization;
}

void DownstreamModel::collect_state(std::vector<nn::TensorRef>& out) {
  encoder_.net.collect_state("encoder.", out);
  head_.collect_state("classifier.", out);
}

Checkpoint DownstreamModel::make_checkpoint(const std::string& source_dataset, std::uint64_t seed,
                                            int epoch) {
  Checkpoint ckpt;
  ckpt.meta.kind = "downstream";
  ckpt.meta.encoder = encoder_.config;
  ckpt.meta.classifier = head_config_;
  ckpt.meta.normalization = stats_;
  ckpt.meta.source_dataset = source_dataset;
  ckpt.meta.seed = seed;
  ckpt.meta.epoch = epoch;
  std::vector<nn::TensorRef> refs;
  collect_state(refs);
  for (auto& r : refs) ckpt.tensors.emplace_back(r.name, *r.tensor);
  return ckpt;
}

std::unique_ptr<DownstreamModel> downstream_from_checkpoint(const Checkpoint& ckpt,
                                                            DownstreamMode mode) {
  if (ckpt.meta.kind != "downstream") {
    raise(ErrorCode::CheckpointIncompatible,
          "expected a downstream checkpoint, got kind '" + ckpt.meta.kind + "'");
  }
  auto model = std::make_unique<DownstreamModel>(ckpt.meta.encoder, ckpt.meta.classifier,
                                                 ckpt.meta.seed, mode);
  std::vector<nn::TensorRef> refs;
  model->collect_state(refs);
  for (auto& r : refs) {
    const Tensor* src = ckpt.find(r.name);
    if (!src) raise(ErrorCode::CheckpointIncompatible, "checkpoint missing tensor " + r.name);
    if (src->dims != r.tensor->dims) {
      raise(ErrorCode::CheckpointIncompatible, "shape mismatch for " + r.name);
    }
    *r.tensor = *src;
  }
  model->set_normalization(ckpt.meta.normalization);
  return model;
}

}  // namespace geossl
