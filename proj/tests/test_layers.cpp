#include "doctest.h"

#include <cmath>
#include <functional>

#include "geossl/layers.hpp"
#include "geossl/prng.hpp"

using geossl::Rng;
using geossl::Tensor;
namespace nn = geossl::nn;

namespace {

Tensor random_tensor(std::vector<std::int64_t> dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(dims));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Loss = sum_i w_i * y_i for a fixed random w: its gradient wrt y is w,
// which makes the numeric check independent of the layer under test.
struct ProbeLoss {
  std::vector<float> w;

  explicit ProbeLoss(const Tensor& y, Rng& rng) {
    w.resize(y.data.size());
    for (auto& v : w) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  double value(const Tensor& y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += static_cast<double>(w[i]) * y.data[i];
    return s;
  }
  Tensor grad(const Tensor& y) const {
    Tensor g(y.dims);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = w[i];
    return g;
  }
};

// Central-difference check of d(loss)/d(x) and d(loss)/d(params) against the
// layer's backward. `train` selects batch-norm statistics mode.
void gradcheck(nn::Layer& layer, Tensor x, bool train, double h = 1e-3, double tol = 5e-3) {
  Rng rng(4242);
  Tensor y = layer.forward(x, train);
  ProbeLoss loss(y, rng);

  nn::zero_grads(layer);
  layer.forward(x, train);  // refresh caches (ProbeLoss construction consumed rng only)
  Tensor dx = layer.backward(loss.grad(y));

  REQUIRE(dx.dims == x.dims);
  auto numeric = [&](std::function<float&()> slot) {
    float& v = slot();
    const float keep = v;
    v = keep + static_cast<float>(h);
    const double up = loss.value(layer.forward(x, train));
    v = keep - static_cast<float>(h);
    const double dn = loss.value(layer.forward(x, train));
    v = keep;
    return (up - dn) / (2.0 * h);
  };

  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double num = numeric([&]() -> float& { return x.data[i]; });
    const double ana = dx.data[i];
    const double err = std::fabs(num - ana) / std::max({1.0, std::fabs(num), std::fabs(ana)});
    if (err >= tol) {
      CAPTURE(i);
      CAPTURE(num);
      CAPTURE(ana);
    }
    REQUIRE(err < tol);
  }

  std::vector<nn::Param*> params;
  layer.collect_params(params);
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      const double num = numeric([&]() -> float& { return p->value.data[i]; });
      const double ana = p->grad.data[i];
      const double err = std::fabs(num - ana) / std::max({1.0, std::fabs(num), std::fabs(ana)});
      if (err >= tol) {
        CAPTURE(p->name);
        CAPTURE(i);
        CAPTURE(num);
        CAPTURE(ana);
      }
      REQUIRE(err < tol);
    }
  }

  // Restore caches from the unperturbed input so callers can keep going.
  layer.forward(x, train);
}

}  // namespace

TEST_CASE("conv2d forward matches a direct convolution") {
  Rng rng(1);
  nn::Conv2d conv(2, 3, 3, 1, 1, true, rng);
  Tensor x = random_tensor({2, 2, 5, 5}, rng);
  Tensor y = conv.forward(x, false);
  std::vector<std::int64_t> want{2, 3, 5, 5};
  CHECK(y.dims == want);

  std::vector<nn::Param*> params;
  conv.collect_params(params);
  const Tensor& w = params[0]->value;
  const Tensor& b = params[1]->value;
  for (int n = 0; n < 2; ++n)
    for (int oc = 0; oc < 3; ++oc)
      for (int oy = 0; oy < 5; ++oy)
        for (int ox = 0; ox < 5; ++ox) {
          double acc = b.data[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < 2; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy - 1 + ky;
                const int ix = ox - 1 + kx;
                if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                acc += static_cast<double>(w.at(oc, ic, ky, kx)) * x.at(n, ic, iy, ix);
              }
          CHECK(y.at(n, oc, oy, ox) == doctest::Approx(acc).epsilon(1e-4));
        }
}

TEST_CASE("conv2d gradient check") {
  Rng rng(2);
  nn::Conv2d conv(2, 3, 3, 1, 1, true, rng);
  gradcheck(conv, random_tensor({2, 2, 5, 5}, rng), false);
}

TEST_CASE("strided conv2d gradient check") {
  Rng rng(3);
  nn::Conv2d conv(3, 2, 3, 2, 1, false, rng);
  gradcheck(conv, random_tensor({1, 3, 7, 7}, rng), false);
}

TEST_CASE("1x1 conv2d gradient check") {
  Rng rng(4);
  nn::Conv2d conv(4, 2, 1, 1, 0, false, rng);
  gradcheck(conv, random_tensor({2, 4, 3, 3}, rng), false);
}

TEST_CASE("batchnorm2d normalizes per channel in train mode") {
  Rng rng(5);
  nn::BatchNorm2d bn(3);
  Tensor x = random_tensor({4, 3, 4, 4}, rng, -2.0, 5.0);
  Tensor y = bn.forward(x, true);
  const std::int64_t plane = 16;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int n = 0; n < 4; ++n) {
      const float* p = y.ptr() + (static_cast<std::int64_t>(n) * 3 + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum += p[i];
        sq += static_cast<double>(p[i]) * p[i];
      }
    }
    const double mean = sum / 64.0;
    const double var = sq / 64.0 - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("batchnorm2d gradient check (train mode)") {
  Rng rng(6);
  nn::BatchNorm2d bn(2);
  // Nudge gamma/beta off their init so their gradients aren't special-cased.
  std::vector<nn::Param*> params;
  bn.collect_params(params);
  for (auto* p : params)
    for (auto& v : p->value.data) v += static_cast<float>(rng.uniform(-0.3, 0.3));
  gradcheck(bn, random_tensor({3, 2, 3, 3}, rng), true, 1e-3, 1e-2);
}

TEST_CASE("batchnorm2d gradient check (eval mode)") {
  Rng rng(7);
  nn::BatchNorm2d bn(2);
  // Populate running stats first.
  bn.forward(random_tensor({4, 2, 5, 5}, rng, -1.0, 3.0), true);
  gradcheck(bn, random_tensor({2, 2, 3, 3}, rng), false);
}

TEST_CASE("relu gradient check") {
  Rng rng(8);
  nn::ReLU relu;
  gradcheck(relu, random_tensor({2, 3, 4, 4}, rng), false);
}

TEST_CASE("maxpool2d forward picks maxima and routes gradients to them") {
  nn::MaxPool2d pool(2, 2);
  Tensor x({1, 1, 2, 2});
  x.data = {1.0f, 5.0f, 3.0f, 2.0f};
  Tensor y = pool.forward(x, false);
  CHECK(y.data.size() == 1);
  CHECK(y.data[0] == 5.0f);
  Tensor dy({1, 1, 1, 1});
  dy.data[0] = 2.5f;
  Tensor dx = pool.backward(dy);
  CHECK(dx.data[0] == 0.0f);
  CHECK(dx.data[1] == 2.5f);
  CHECK(dx.data[2] == 0.0f);
}

TEST_CASE("maxpool2d gradient check") {
  Rng rng(9);
  nn::MaxPool2d pool(2, 2);
  gradcheck(pool, random_tensor({2, 2, 6, 6}, rng), false);
}

TEST_CASE("padded maxpool3/2 gradient check") {
  Rng rng(10);
  nn::MaxPool2d pool(3, 2, 1);
  gradcheck(pool, random_tensor({1, 2, 7, 7}, rng), false);
}

TEST_CASE("global average pool gradient check and value") {
  Rng rng(11);
  nn::GlobalAvgPool gap;
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor y = gap.forward(x, false);
  std::vector<std::int64_t> want{2, 3};
  CHECK(y.dims == want);
  double s = 0.0;
  for (int i = 0; i < 16; ++i) s += x.data[static_cast<std::size_t>(i)];
  CHECK(y.data[0] == doctest::Approx(s / 16.0));
  gradcheck(gap, x, false);
}

TEST_CASE("linear gradient check") {
  Rng rng(12);
  nn::Linear lin(5, 3, true, rng);
  gradcheck(lin, random_tensor({4, 5}, rng), false);
}

TEST_CASE("sequential composes and taps the requested layer") {
  Rng rng(13);
  nn::Sequential seq;
  seq.append("conv", std::make_unique<nn::Conv2d>(1, 2, 3, 1, 1, false, rng));
  seq.append("relu", std::make_unique<nn::ReLU>());
  seq.append("gap", std::make_unique<nn::GlobalAvgPool>());
  seq.set_tap(1);

  Tensor x = random_tensor({1, 1, 4, 4}, rng);
  Tensor y = seq.forward(x, false);
  std::vector<std::int64_t> want{1, 2};
  CHECK(y.dims == want);
  std::vector<std::int64_t> tap_want{1, 2, 4, 4};
  CHECK(seq.tap_value().dims == tap_want);

  Tensor dy({1, 2});
  dy.data = {1.0f, -1.0f};
  seq.backward(dy);
  CHECK(seq.tap_grad().dims == tap_want);
  // Gradient wrt gap input is dy / plane.
  CHECK(seq.tap_grad().data[0] == doctest::Approx(1.0 / 16.0));
  CHECK(seq.tap_grad().data[16] == doctest::Approx(-1.0 / 16.0));
}

TEST_CASE("sequential gradient check") {
  Rng rng(14);
  nn::Sequential seq;
  seq.append("conv", std::make_unique<nn::Conv2d>(2, 3, 3, 1, 1, false, rng));
  seq.append("bn", std::make_unique<nn::BatchNorm2d>(3));
  seq.append("relu", std::make_unique<nn::ReLU>());
  seq.append("pool", std::make_unique<nn::MaxPool2d>(2, 2));
  gradcheck(seq, random_tensor({2, 2, 4, 4}, rng), true, 1e-3, 1e-2);
}

TEST_CASE("bottleneck keeps shape contracts") {
  Rng rng(15);
  nn::Bottleneck plain(8, 2, 8, 1, rng);     // identity shortcut
  nn::Bottleneck projected(4, 2, 8, 2, rng); // strided projection shortcut
  Tensor x = random_tensor({1, 8, 6, 6}, rng);
  std::vector<std::int64_t> same{1, 8, 6, 6};
  CHECK(plain.forward(x, false).dims == same);
  Tensor x2 = random_tensor({1, 4, 6, 6}, rng);
  std::vector<std::int64_t> halved{1, 8, 3, 3};
  CHECK(projected.forward(x2, false).dims == halved);
}

TEST_CASE("bottleneck gradient check (identity and projection)") {
  Rng rng(16);
  nn::Bottleneck plain(4, 2, 4, 1, rng);
  gradcheck(plain, random_tensor({2, 4, 4, 4}, rng), true, 1e-3, 1.5e-2);
  nn::Bottleneck projected(2, 2, 4, 2, rng);
  gradcheck(projected, random_tensor({2, 2, 4, 4}, rng), true, 1e-3, 1.5e-2);
}

TEST_CASE("weight decay flags separate weights from biases and norms") {
  Rng rng(17);
  nn::Sequential seq;
  seq.append("conv", std::make_unique<nn::Conv2d>(1, 2, 3, 1, 1, true, rng));
  seq.append("bn", std::make_unique<nn::BatchNorm2d>(2));
  seq.append("gap", std::make_unique<nn::GlobalAvgPool>());
  seq.append("fc", std::make_unique<nn::Linear>(2, 2, true, rng));
  std::vector<nn::Param*> params;
  seq.collect_params(params);
  REQUIRE(params.size() == 6);
  int decayed = 0;
  for (auto* p : params) decayed += p->decay ? 1 : 0;
  CHECK(decayed == 2);  // conv weight + linear weight only
}
