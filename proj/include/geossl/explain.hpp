#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geossl/image.hpp"
#include "geossl/models.hpp"
#include "geossl/tensor.hpp"

namespace geossl {

struct CamHeatmap {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // row-major h×w in [0,1]
  int target_class = -1;
  std::string source;
  std::string model_digest;

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Gradient-weighted combination of a conv feature map: channel weights are
/// the spatial means of the gradient, the weighted sum is rectified and
/// min-max normalized (an all-constant map normalizes to zero). Inputs are
/// [1,C,h,w] or [C,h,w]; output is [h,w].
Tensor cam_from_features(const Tensor& activations, const Tensor& gradients);

/// End-to-end heatmap for one image: forward, backprop of the chosen class
/// logit to the encoder's final conv feature map (or the layer `tap`
/// overrides), then bilinear upsampling to the source resolution.
CamHeatmap activation_map(DownstreamModel& model, const ImageSample& image, int class_index,
                          int tap = -1);

/// The model's predicted class for one image: eval transform, normalization,
/// forward, argmax over the logits.
int predict_class(DownstreamModel& model, const ImageSample& image);

/// Alpha-blends a colormapped heatmap over the source: each pixel moves
/// toward the colormap proportionally to its heat, so an all-zero map
/// reproduces the source exactly. Deterministic bytes for fixed inputs.
void overlay(const CamHeatmap& heatmap, const ImageSample& image,
             const std::filesystem::path& out_path, const std::string& colormap = "jet");

/// Horizontal grid of panels (source | one CAM overlay per model) written
/// as a single image, for side-by-side comparison figures.
void side_by_side(const std::vector<ImageSample>& panels, const std::filesystem::path& out_path,
                  int gap = 4);

ImageSample render_overlay(const CamHeatmap& heatmap, const ImageSample& image,
                           const std::string& colormap = "jet");

}  // namespace geossl
