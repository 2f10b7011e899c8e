#include "geossl/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <limits>

#include "geossl/errors.hpp"

namespace geossl::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// x: one sample [C,H,W]; col: [C*k*k, out_h*out_w] row-major. Out-of-bounds
// taps read as zero.
void im2col(const float* x, int C, int H, int W, int k, int stride, int pad, int out_h, int out_w,
            float* col) {
  const std::int64_t L = static_cast<std::int64_t>(out_h) * out_w;
  std::int64_t r = 0;
  for (int c = 0; c < C; ++c) {
    const float* plane = x + static_cast<std::int64_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++r) {
        float* dst = col + r * L;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::memset(dst + static_cast<std::int64_t>(oy) * out_w, 0,
                        sizeof(float) * static_cast<std::size_t>(out_w));
            continue;
          }
          const float* src_row = plane + static_cast<std::int64_t>(iy) * W;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[static_cast<std::int64_t>(oy) * out_w + ox] =
                (ix >= 0 && ix < W) ? src_row[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, int C, int H, int W, int k, int stride, int pad, int out_h,
                int out_w, float* dx) {
  const std::int64_t L = static_cast<std::int64_t>(out_h) * out_w;
  std::int64_t r = 0;
  for (int c = 0; c < C; ++c) {
    float* plane = dx + static_cast<std::int64_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++r) {
        const float* src = col + r * L;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          float* dst_row = plane + static_cast<std::int64_t>(iy) * W;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst_row[ix] += src[static_cast<std::int64_t>(oy) * out_w + ox];
          }
        }
      }
    }
  }
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

void require_nchw(const Tensor& x, const char* who) {
  if (x.dims.size() != 4) {
    raise(ErrorCode::ConfigError, std::string(who) + " expects [N,C,H,W], got " + x.shape_str());
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias,
               Rng& rng)
    : in_c_(in_channels), out_c_(out_channels), k_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias) {
  if (in_c_ <= 0 || out_c_ <= 0 || k_ <= 0 || stride_ <= 0 || pad_ < 0) {
    raise(ErrorCode::ConfigError, "conv2d: bad geometry");
  }
  weight_.name = "weight";
  weight_.value = Tensor({out_c_, in_c_, k_, k_});
  weight_.grad = Tensor(weight_.value.dims);
  weight_.decay = true;
  const double fan_in = static_cast<double>(in_c_) * k_ * k_;
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& w : weight_.value.data) w = static_cast<float>(rng.normal(0.0, std));
  if (has_bias_) {
    bias_.name = "bias";
    bias_.value = Tensor({out_c_});
    bias_.grad = Tensor({out_c_});
    bias_.decay = false;
  }
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  require_nchw(x, "conv2d");
  if (x.dims[1] != in_c_) {
    raise(ErrorCode::ConfigError, "conv2d: expected " + std::to_string(in_c_) + " channels, got " +
                                      std::to_string(x.dims[1]));
  }
  x_ = x;
  const int N = static_cast<int>(x.dims[0]);
  const int H = static_cast<int>(x.dims[2]);
  const int W = static_cast<int>(x.dims[3]);
  const int out_h = conv_out_extent(H, k_, stride_, pad_);
  const int out_w = conv_out_extent(W, k_, stride_, pad_);
  if (out_h <= 0 || out_w <= 0) {
    raise(ErrorCode::ConfigError, "conv2d: input " + x.shape_str() + " too small for kernel");
  }
  const std::int64_t K = static_cast<std::int64_t>(in_c_) * k_ * k_;
  const std::int64_t L = static_cast<std::int64_t>(out_h) * out_w;

  Tensor y({N, out_c_, out_h, out_w});
  std::vector<float> col(static_cast<std::size_t>(K * L));
  MapConst wmat(weight_.value.ptr(), out_c_, K);
  for (int n = 0; n < N; ++n) {
    im2col(x.ptr() + static_cast<std::int64_t>(n) * in_c_ * H * W, in_c_, H, W, k_, stride_, pad_,
           out_h, out_w, col.data());
    MapConst cmat(col.data(), K, L);
    MapMat ymat(y.ptr() + static_cast<std::int64_t>(n) * out_c_ * L, out_c_, L);
    ymat.noalias() = wmat * cmat;
    if (has_bias_) {
      for (int oc = 0; oc < out_c_; ++oc) ymat.row(oc).array() += bias_.value.data[static_cast<std::size_t>(oc)];
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int N = static_cast<int>(x_.dims[0]);
  const int H = static_cast<int>(x_.dims[2]);
  const int W = static_cast<int>(x_.dims[3]);
  const int out_h = static_cast<int>(dy.dims[2]);
  const int out_w = static_cast<int>(dy.dims[3]);
  const std::int64_t K = static_cast<std::int64_t>(in_c_) * k_ * k_;
  const std::int64_t L = static_cast<std::int64_t>(out_h) * out_w;

  Tensor dx(x_.dims);
  std::vector<float> col(static_cast<std::size_t>(K * L));
  std::vector<float> dcol(static_cast<std::size_t>(K * L));
  MapConst wmat(weight_.value.ptr(), out_c_, K);
  MapMat dwmat(weight_.grad.ptr(), out_c_, K);
  for (int n = 0; n < N; ++n) {
    im2col(x_.ptr() + static_cast<std::int64_t>(n) * in_c_ * H * W, in_c_, H, W, k_, stride_, pad_,
           out_h, out_w, col.data());
    MapConst cmat(col.data(), K, L);
    MapConst dymat(dy.ptr() + static_cast<std::int64_t>(n) * out_c_ * L, out_c_, L);
    dwmat.noalias() += dymat * cmat.transpose();
    if (has_bias_) {
      for (int oc = 0; oc < out_c_; ++oc) bias_.grad.data[static_cast<std::size_t>(oc)] += dymat.row(oc).sum();
    }
    MapMat dcmat(dcol.data(), K, L);
    dcmat.noalias() = wmat.transpose() * dymat;
    col2im_add(dcol.data(), in_c_, H, W, k_, stride_, pad_, out_h, out_w,
               dx.ptr() + static_cast<std::int64_t>(n) * in_c_ * H * W);
  }
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

void Conv2d::collect_state(const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "weight", &weight_.value});
  if (has_bias_) out.push_back({prefix + "bias", &bias_.value});
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : c_(channels), momentum_(momentum), eps_(eps) {
  gamma_.name = "weight";
  gamma_.value = Tensor({c_});
  gamma_.value.fill(1.0f);
  gamma_.grad = Tensor({c_});
  gamma_.decay = false;
  beta_.name = "bias";
  beta_.value = Tensor({c_});
  beta_.grad = Tensor({c_});
  beta_.decay = false;
  running_mean_ = Tensor({c_});
  running_var_ = Tensor({c_});
  running_var_.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  require_nchw(x, "batchnorm2d");
  const std::int64_t N = x.dims[0], C = x.dims[1], plane = x.dims[2] * x.dims[3];
  if (C != c_) raise(ErrorCode::ConfigError, "batchnorm2d: channel mismatch");
  train_mode_ = train;
  xhat_ = Tensor(x.dims);
  inv_std_.assign(static_cast<std::size_t>(c_), 0.0f);
  Tensor y(x.dims);
  const std::int64_t M = N * plane;
  for (std::int64_t c = 0; c < C; ++c) {
    double mean, var;
    if (train) {
      double sum = 0.0, sq = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* p = x.ptr() + (n * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      mean = sum / static_cast<double>(M);
      var = sq / static_cast<double>(M) - mean * mean;
      if (var < 0.0) var = 0.0;  // fp round-off guard
      auto& rm = running_mean_.data[static_cast<std::size_t>(c)];
      auto& rv = running_var_.data[static_cast<std::size_t>(c)];
      const double unbiased = M > 1 ? var * static_cast<double>(M) / static_cast<double>(M - 1) : var;
      rm = static_cast<float>((1.0 - momentum_) * rm + momentum_ * mean);
      rv = static_cast<float>((1.0 - momentum_) * rv + momentum_ * unbiased);
    } else {
      mean = running_mean_.data[static_cast<std::size_t>(c)];
      var = running_var_.data[static_cast<std::size_t>(c)];
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[static_cast<std::size_t>(c)] = inv;
    const float fm = static_cast<float>(mean);
    const float g = gamma_.value.data[static_cast<std::size_t>(c)];
    const float b = beta_.value.data[static_cast<std::size_t>(c)];
    for (std::int64_t n = 0; n < N; ++n) {
      const float* px = x.ptr() + (n * C + c) * plane;
      float* ph = xhat_.ptr() + (n * C + c) * plane;
      float* py = y.ptr() + (n * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        ph[i] = (px[i] - fm) * inv;
        py[i] = g * ph[i] + b;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const std::int64_t N = dy.dims[0], C = dy.dims[1], plane = dy.dims[2] * dy.dims[3];
  const std::int64_t M = N * plane;
  Tensor dx(dy.dims);
  for (std::int64_t c = 0; c < C; ++c) {
    const float g = gamma_.value.data[static_cast<std::size_t>(c)];
    const float inv = inv_std_[static_cast<std::size_t>(c)];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
      const float* pdy = dy.ptr() + (n * C + c) * plane;
      const float* ph = xhat_.ptr() + (n * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_dy += pdy[i];
        sum_dy_xhat += static_cast<double>(pdy[i]) * ph[i];
      }
    }
    gamma_.grad.data[static_cast<std::size_t>(c)] += static_cast<float>(sum_dy_xhat);
    beta_.grad.data[static_cast<std::size_t>(c)] += static_cast<float>(sum_dy);
    if (train_mode_) {
      const double k1 = sum_dy / static_cast<double>(M);
      const double k2 = sum_dy_xhat / static_cast<double>(M);
      for (std::int64_t n = 0; n < N; ++n) {
        const float* pdy = dy.ptr() + (n * C + c) * plane;
        const float* ph = xhat_.ptr() + (n * C + c) * plane;
        float* pdx = dx.ptr() + (n * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          pdx[i] = static_cast<float>(g * inv * (pdy[i] - k1 - ph[i] * k2));
        }
      }
    } else {
      // Running stats are constants, so the chain is elementwise.
      const float scale = g * inv;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* pdy = dy.ptr() + (n * C + c) * plane;
        float* pdx = dx.ptr() + (n * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) pdx[i] = scale * pdy[i];
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_state(const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "weight", &gamma_.value});
  out.push_back({prefix + "bias", &beta_.value});
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  Tensor y = x;
  for (auto& v : y.data) v = v > 0.0f ? v : 0.0f;
  y_ = y;
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    if (y_.data[i] <= 0.0f) dx.data[i] = 0.0f;
  }
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(int kernel, int stride, int pad) : k_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  require_nchw(x, "maxpool2d");
  const int N = static_cast<int>(x.dims[0]);
  const int C = static_cast<int>(x.dims[1]);
  const int H = static_cast<int>(x.dims[2]);
  const int W = static_cast<int>(x.dims[3]);
  const int out_h = conv_out_extent(H, k_, stride_, pad_);
  const int out_w = conv_out_extent(W, k_, stride_, pad_);
  if (out_h <= 0 || out_w <= 0) raise(ErrorCode::ConfigError, "maxpool2d: input too small");
  in_dims_ = x.dims;
  Tensor y({N, C, out_h, out_w});
  argmax_.assign(static_cast<std::size_t>(y.numel()), -1);
  std::int64_t oi = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox, ++oi) {
          float best = -std::numeric_limits<float>::infinity();
          std::int64_t best_idx = -1;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= W) continue;
              const std::int64_t idx = base + static_cast<std::int64_t>(iy) * W + ix;
              const float v = x.data[static_cast<std::size_t>(idx)];
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          y.data[static_cast<std::size_t>(oi)] = best;
          argmax_[static_cast<std::size_t>(oi)] = best_idx;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(in_dims_);
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    dx.data[static_cast<std::size_t>(argmax_[i])] += dy.data[i];
  }
  return dx;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  require_nchw(x, "gap");
  in_dims_ = x.dims;
  const std::int64_t N = x.dims[0], C = x.dims[1], plane = x.dims[2] * x.dims[3];
  Tensor y({N, C});
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      const float* p = x.ptr() + (n * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) s += p[i];
      y.data[static_cast<std::size_t>(n * C + c)] = static_cast<float>(s / static_cast<double>(plane));
    }
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(in_dims_);
  const std::int64_t N = in_dims_[0], C = in_dims_[1], plane = in_dims_[2] * in_dims_[3];
  const float scale = 1.0f / static_cast<float>(plane);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      const float g = dy.data[static_cast<std::size_t>(n * C + c)] * scale;
      float* p = dx.ptr() + (n * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) p[i] = g;
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, bool bias, Rng& rng)
    : in_f_(in_features), out_f_(out_features), has_bias_(bias) {
  if (in_f_ <= 0 || out_f_ <= 0) raise(ErrorCode::ConfigError, "linear: bad dims");
  weight_.name = "weight";
  weight_.value = Tensor({out_f_, in_f_});
  weight_.grad = Tensor(weight_.value.dims);
  weight_.decay = true;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_f_));
  for (auto& w : weight_.value.data) w = static_cast<float>(rng.uniform(-bound, bound));
  if (has_bias_) {
    bias_.name = "bias";
    bias_.value = Tensor({out_f_});
    bias_.grad = Tensor({out_f_});
    bias_.decay = false;
    for (auto& b : bias_.value.data) b = static_cast<float>(rng.uniform(-bound, bound));
  }
}

Tensor Linear::forward(const Tensor& x, bool) {
  if (x.dims.size() != 2 || x.dims[1] != in_f_) {
    raise(ErrorCode::ConfigError, "linear: expected [N," + std::to_string(in_f_) + "], got " + x.shape_str());
  }
  x_ = x;
  const std::int64_t N = x.dims[0];
  Tensor y({N, out_f_});
  MapConst xm(x.ptr(), N, in_f_);
  MapConst wm(weight_.value.ptr(), out_f_, in_f_);
  MapMat ym(y.ptr(), N, out_f_);
  ym.noalias() = xm * wm.transpose();
  if (has_bias_) {
    for (std::int64_t n = 0; n < N; ++n)
      for (int o = 0; o < out_f_; ++o) y.data[static_cast<std::size_t>(n * out_f_ + o)] += bias_.value.data[static_cast<std::size_t>(o)];
  }
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const std::int64_t N = x_.dims[0];
  MapConst dym(dy.ptr(), N, out_f_);
  MapConst xm(x_.ptr(), N, in_f_);
  MapConst wm(weight_.value.ptr(), out_f_, in_f_);
  MapMat dwm(weight_.grad.ptr(), out_f_, in_f_);
  dwm.noalias() += dym.transpose() * xm;
  if (has_bias_) {
    for (int o = 0; o < out_f_; ++o) bias_.grad.data[static_cast<std::size_t>(o)] += dym.col(o).sum();
  }
  Tensor dx({N, in_f_});
  MapMat dxm(dx.ptr(), N, in_f_);
  dxm.noalias() = dym * wm;
  return dx;
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

void Linear::collect_state(const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "weight", &weight_.value});
  if (has_bias_) out.push_back({prefix + "bias", &bias_.value});
}

// ------------------------------------------------------------ Sequential

void Sequential::append(std::string name, std::unique_ptr<Layer> layer) {
  layers_.push_back({std::move(name), std::move(layer)});
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].layer->forward(h, train);
    if (static_cast<int>(i) == tap_index_) tap_value_ = h;
  }
  return h;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (static_cast<int>(i) == tap_index_) tap_grad_ = g;
    g = layers_[i].layer->backward(g);
  }
  return g;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& e : layers_) e.layer->collect_params(out);
}

void Sequential::collect_state(const std::string& prefix, std::vector<TensorRef>& out) {
  for (auto& e : layers_) e.layer->collect_state(prefix + e.name + ".", out);
}

// ------------------------------------------------------------ Bottleneck

Bottleneck::Bottleneck(int in_channels, int mid_channels, int out_channels, int stride, Rng& rng) {
  conv1_ = std::make_unique<Conv2d>(in_channels, mid_channels, 1, 1, 0, false, rng);
  bn1_ = std::make_unique<BatchNorm2d>(mid_channels);
  conv2_ = std::make_unique<Conv2d>(mid_channels, mid_channels, 3, stride, 1, false, rng);
  bn2_ = std::make_unique<BatchNorm2d>(mid_channels);
  conv3_ = std::make_unique<Conv2d>(mid_channels, out_channels, 1, 1, 0, false, rng);
  bn3_ = std::make_unique<BatchNorm2d>(out_channels);
  has_down_ = stride != 1 || in_channels != out_channels;
  if (has_down_) {
    down_conv_ = std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, false, rng);
    down_bn_ = std::make_unique<BatchNorm2d>(out_channels);
  }
}

Tensor Bottleneck::forward(const Tensor& x, bool train) {
  x_ = x;
  Tensor h = relu1_.forward(bn1_->forward(conv1_->forward(x, train), train), train);
  h = relu2_.forward(bn2_->forward(conv2_->forward(h, train), train), train);
  h = bn3_->forward(conv3_->forward(h, train), train);
  Tensor s = has_down_ ? down_bn_->forward(down_conv_->forward(x, train), train) : x;
  return relu_out_.forward(add_tensors(h, s), train);
}

Tensor Bottleneck::backward(const Tensor& dy) {
  Tensor g = relu_out_.backward(dy);
  Tensor gh = conv3_->backward(bn3_->backward(g));
  gh = conv2_->backward(bn2_->backward(relu2_.backward(gh)));
  gh = conv1_->backward(bn1_->backward(relu1_.backward(gh)));
  Tensor gs = has_down_ ? down_conv_->backward(down_bn_->backward(g)) : g;
  return add_tensors(gh, gs);
}

void Bottleneck::collect_params(std::vector<Param*>& out) {
  conv1_->collect_params(out);
  bn1_->collect_params(out);
  conv2_->collect_params(out);
  bn2_->collect_params(out);
  conv3_->collect_params(out);
  bn3_->collect_params(out);
  if (has_down_) {
    down_conv_->collect_params(out);
    down_bn_->collect_params(out);
  }
}

void Bottleneck::collect_state(const std::string& prefix, std::vector<TensorRef>& out) {
  conv1_->collect_state(prefix + "conv1.", out);
  bn1_->collect_state(prefix + "bn1.", out);
  conv2_->collect_state(prefix + "conv2.", out);
  bn2_->collect_state(prefix + "bn2.", out);
  conv3_->collect_state(prefix + "conv3.", out);
  bn3_->collect_state(prefix + "bn3.", out);
  if (has_down_) {
    down_conv_->collect_state(prefix + "downsample.0.", out);
    down_bn_->collect_state(prefix + "downsample.1.", out);
  }
}

// ----------------------------------------------------------------- misc

std::int64_t parameter_count(Layer& layer) {
  std::vector<Param*> params;
  layer.collect_params(params);
  std::int64_t n = 0;
  for (auto* p : params) n += p->value.numel();
  return n;
}

void zero_grads(Layer& layer) {
  std::vector<Param*> params;
  layer.collect_params(params);
  for (auto* p : params) p->grad.fill(0.0f);
}

}  // namespace geossl::nn
