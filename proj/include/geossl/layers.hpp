#pragma once

#include <memory>
#include <string>
#include <vector>

#include "geossl/prng.hpp"
#include "geossl/tensor.hpp"

namespace geossl::nn {

/// One learnable array plus its gradient accumulator. `decay` marks
/// participation in weight decay: convolution and linear weights decay,
/// biases and batch-norm affine terms do not.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool decay = true;
};

/// Named view over a tensor that must survive checkpointing — learnable
/// params and running statistics alike.
struct TensorRef {
  std::string name;
  Tensor* tensor;
};

class Layer {
 public:
  virtual ~Layer() = default;
  /// `train` toggles batch-norm statistics mode; layers cache whatever the
  /// matching backward needs.
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  /// Consumes d(loss)/d(output), accumulates into param grads, returns
  /// d(loss)/d(input).
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  /// Params plus non-learnable state (running stats), prefixed.
  virtual void collect_state(const std::string& prefix, std::vector<TensorRef>& out) {}
  virtual const char* kind() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_state(const std::string& prefix, std::vector<TensorRef>& out) override;
  const char* kind() const override { return "conv2d"; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  bool has_bias_;
  Param weight_;  // [out_c, in_c, k, k]
  Param bias_;    // [out_c]
  Tensor x_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_state(const std::string& prefix, std::vector<TensorRef>& out) override;
  const char* kind() const override { return "batchnorm2d"; }

 private:
  int c_;
  double momentum_, eps_;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  // backward caches
  Tensor xhat_;
  std::vector<float> inv_std_;
  bool train_mode_ = false;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "relu"; }

 private:
  Tensor y_;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int pad = 0);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "maxpool2d"; }

 private:
  int k_, stride_, pad_;
  std::vector<std::int64_t> argmax_;  // flat input index per output element
  std::vector<std::int64_t> in_dims_;
};

/// [N,C,H,W] -> [N,C], mean over the spatial plane.
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "gap"; }

 private:
  std::vector<std::int64_t> in_dims_;
};

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, bool bias, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_state(const std::string& prefix, std::vector<TensorRef>& out) override;
  const char* kind() const override { return "linear"; }

 private:
  int in_f_, out_f_;
  bool has_bias_;
  Param weight_;  // [out, in]
  Param bias_;
  Tensor x_;
};

/// Layer pipeline with an optional tap: when `tap_index` is set, forward
/// records that layer's output and backward records the gradient arriving at
/// it — the two arrays class-activation maps are built from.
class Sequential final : public Layer {
 public:
  Sequential() = default;
  void append(std::string name, std::unique_ptr<Layer> layer);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_state(const std::string& prefix, std::vector<TensorRef>& out) override;
  const char* kind() const override { return "sequential"; }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i].layer; }
  const std::string& layer_name(std::size_t i) const { return layers_[i].name; }

  void set_tap(int index) { tap_index_ = index; }
  int tap_index() const { return tap_index_; }
  const Tensor& tap_value() const { return tap_value_; }
  const Tensor& tap_grad() const { return tap_grad_; }

 private:
  struct Entry {
    std::string name;
    std::unique_ptr<Layer> layer;
  };
  std::vector<Entry> layers_;
  int tap_index_ = -1;
  Tensor tap_value_, tap_grad_;
};

/// Standard residual bottleneck: 1x1 reduce, 3x3 (carries the stride),
/// 1x1 expand, each batch-normed; identity or 1x1-projected shortcut.
class Bottleneck final : public Layer {
 public:
  Bottleneck(int in_channels, int mid_channels, int out_channels, int stride, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_state(const std::string& prefix, std::vector<TensorRef>& out) override;
  const char* kind() const override { return "bottleneck"; }

 private:
  std::unique_ptr<Conv2d> conv1_, conv2_, conv3_, down_conv_;
  std::unique_ptr<BatchNorm2d> bn1_, bn2_, bn3_, down_bn_;
  ReLU relu1_, relu2_, relu_out_;
  Tensor x_;
  bool has_down_;
};

std::int64_t parameter_count(Layer& layer);
void zero_grads(Layer& layer);

}  // namespace geossl::nn
