#include "geossl/explain.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

#include "geossl/augment.hpp"
#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

Tensor cam_from_features(const Tensor& activations, const Tensor& gradients) {
  if (activations.dims != gradients.dims) {
    raise(ErrorCode::InvalidArgument, "activation/gradient shape mismatch: " +
                                          activations.shape_str() + " vs " + gradients.shape_str());
  }
  std::int64_t C, h, w, offset = 0;
  if (activations.dims.size() == 4 && activations.dims[0] == 1) {
    C = activations.dims[1];
    h = activations.dims[2];
    w = activations.dims[3];
  } else if (activations.dims.size() == 3) {
    C = activations.dims[0];
    h = activations.dims[1];
    w = activations.dims[2];
  } else {
    raise(ErrorCode::InvalidArgument, "expected [1,C,h,w] or [C,h,w], got " + activations.shape_str());
  }
  const std::int64_t plane = h * w;

  Tensor cam({h, w});
  for (std::int64_t c = 0; c < C; ++c) {
    const float* grad = gradients.ptr() + offset + c * plane;
    double alpha = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) alpha += grad[i];
    alpha /= static_cast<double>(plane);
    const float* act = activations.ptr() + offset + c * plane;
    for (std::int64_t i = 0; i < plane; ++i) {
      cam.data[static_cast<std::size_t>(i)] += static_cast<float>(alpha) * act[i];
    }
  }
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (auto& v : cam.data) {
    v = std::max(0.0f, v);  // rectify: negative influence carries no mass
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12f) {
    cam.fill(0.0f);  // constant map: no spatial preference to show
  } else {
    for (auto& v : cam.data) v = (v - lo) / (hi - lo);
  }
  return cam;
}

namespace {

std::string weights_digest(DownstreamModel& model) {
  std::vector<nn::TensorRef> refs;
  model.collect_state(refs);
  std::uint64_t h = kFnvOffset;
  for (auto& r : refs) {
    h = fnv1a64(r.name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(r.tensor->data.data()),
                                 r.tensor->data.size() * sizeof(float)),
                h);
  }
  return to_hex(h);
}

}  // namespace

CamHeatmap activation_map(DownstreamModel& model, const ImageSample& image, int class_index,
                          int tap) {
  if (class_index < 0 || class_index >= model.head_config().num_classes) {
    raise(ErrorCode::InvalidArgument, "class_index out of range");
  }
  auto& enc = model.encoder();
  const int tap_index = tap >= 0 ? tap : enc.cam_tap;
  if (tap_index < 0 || tap_index >= static_cast<int>(enc.net.size())) {
    raise(ErrorCode::Unsupported, "model exposes no convolutional feature map");
  }
  const int previous_tap = enc.net.tap_index();
  enc.net.set_tap(tap_index);

  const int S = model.encoder_config().input_size;
  Tensor x = downstream_transform(image, false, 0, S);
  Tensor batch({1, 3, S, S});
  batch.data = x.data;
  normalize_inplace(batch, model.normalization());

  Tensor logits = model.forward(batch, false);
  Tensor d_logits(logits.dims);
  d_logits.data[static_cast<std::size_t>(class_index)] = 1.0f;
  model.backward(d_logits, /*force_encoder=*/true);
  model.zero_grads();  // weight grads are a side effect we don't keep

  Tensor cam = cam_from_features(enc.net.tap_value(), enc.net.tap_grad());
  enc.net.set_tap(previous_tap);

  // Bilinear upsample to the source image's resolution.
  cv::Mat small(static_cast<int>(cam.dims[0]), static_cast<int>(cam.dims[1]), CV_32FC1,
                cam.ptr());
  cv::Mat big;
  cv::resize(small, big, cv::Size(image.width, image.height), 0, 0, cv::INTER_LINEAR);

  CamHeatmap heat;
  heat.height = image.height;
  heat.width = image.width;
  heat.values.resize(static_cast<std::size_t>(image.height) * image.width);
  for (int y = 0; y < image.height; ++y) {
    const float* row = big.ptr<float>(y);
    for (int xcol = 0; xcol < image.width; ++xcol) {
      heat.values[static_cast<std::size_t>(y) * image.width + xcol] =
          std::clamp(row[xcol], 0.0f, 1.0f);
    }
  }
  heat.target_class = class_index;
  heat.source = image.source_path.string();
  heat.model_digest = weights_digest(model);
  return heat;
}

int predict_class(DownstreamModel& model, const ImageSample& image) {
  const int S = model.encoder_config().input_size;
  Tensor x = downstream_transform(image, false, 0, S);
  Tensor batch({1, 3, S, S});
  batch.data = x.data;
  normalize_inplace(batch, model.normalization());
  Tensor logits = model.forward(batch, false);
  int best = 0;
  for (std::int64_t c = 1; c < logits.dims[1]; ++c) {
    if (logits.data[static_cast<std::size_t>(c)] > logits.data[static_cast<std::size_t>(best)])
      best = static_cast<int>(c);
  }
  return best;
}

ImageSample render_overlay(const CamHeatmap& heatmap, const ImageSample& image,
                           const std::string& colormap) {
  if (heatmap.height != image.height || heatmap.width != image.width) {
    raise(ErrorCode::InvalidArgument, "heatmap/image size mismatch");
  }
  int cmap;
  if (colormap == "jet") {
    cmap = cv::COLORMAP_JET;
  } else if (colormap == "turbo") {
    cmap = cv::COLORMAP_TURBO;
  } else if (colormap == "viridis") {
    cmap = cv::COLORMAP_VIRIDIS;
  } else {
    raise(ErrorCode::InvalidArgument, "unknown colormap: " + colormap);
  }

  cv::Mat heat8(heatmap.height, heatmap.width, CV_8UC1);
  for (int y = 0; y < heatmap.height; ++y) {
    for (int x = 0; x < heatmap.width; ++x) {
      heat8.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(heatmap.at(y, x) * 255.0f));
    }
  }
  cv::Mat colored_bgr;
  cv::applyColorMap(heat8, colored_bgr, cmap);
  cv::Mat colored;
  cv::cvtColor(colored_bgr, colored, cv::COLOR_BGR2RGB);

  // Per-pixel blend weight = 0.5 * heat, so zero heat keeps the source byte.
  ImageSample out = image;
  constexpr float kStrength = 0.5f;
  for (int y = 0; y < image.height; ++y) {
    const auto* crow = colored.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      const float a = kStrength * heatmap.at(y, x);
      if (a == 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        const float blended = (1.0f - a) * static_cast<float>(image.at(y, x, c)) +
                              a * static_cast<float>(crow[x][static_cast<int>(c)]);
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(blended));
      }
    }
  }
  return out;
}

void overlay(const CamHeatmap& heatmap, const ImageSample& image,
             const std::filesystem::path& out_path, const std::string& colormap) {
  save_png(render_overlay(heatmap, image, colormap), out_path);
}

void side_by_side(const std::vector<ImageSample>& panels, const std::filesystem::path& out_path,
                  int gap) {
  if (panels.empty()) raise(ErrorCode::InvalidArgument, "no panels");
  int height = 0, width = 0;
  for (const auto& p : panels) {
    height = std::max(height, p.height);
    width += p.width;
  }
  width += gap * static_cast<int>(panels.size() - 1);

  ImageSample grid;
  grid.height = height;
  grid.width = width;
  grid.pixels.assign(static_cast<std::size_t>(height) * width * 3, 255);
  int x0 = 0;
  for (const auto& p : panels) {
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x)
        for (int c = 0; c < 3; ++c) grid.at(y, x0 + x, c) = p.at(y, x, c);
    x0 += p.width + gap;
  }
  save_png(grid, out_path);
}

}  // namespace geossl
