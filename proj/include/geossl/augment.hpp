#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geossl/image.hpp"
#include "geossl/tensor.hpp"

namespace geossl {

enum class RotationFill { kReflect, kZero };

/// Stochastic augmentation chain for the pretext task. Steps run in the
/// fixed order resize, horizontal flip, vertical flip, rotation, grayscale,
/// gaussian blur. Rotation is always applied with an angle drawn from
/// rotation_range; exposed corners use reflection padding unless
/// rotation_fill says otherwise. The blur sigma is drawn uniformly from
/// blur_sigma_range.
struct AugmentationConfig {
  int resize_height = 224;
  int resize_width = 224;
  double hflip_p = 0.5;
  double vflip_p = 0.5;
  double rotation_low = -90.0;
  double rotation_high = 90.0;
  double grayscale_p = 0.2;
  double blur_p = 0.51;
  int blur_kernel = 21;
  double blur_sigma_low = 0.1;
  double blur_sigma_high = 2.0;
  RotationFill rotation_fill = RotationFill::kReflect;
};

/// Two independently augmented views of the same source image, CHW floats
/// in [0,1].
struct ViewPair {
  Tensor view_a;
  Tensor view_b;
  std::size_t source_index = 0;
};

/// Empty iff the config satisfies every invariant; otherwise one message
/// per violation.
std::vector<std::string> validate_config(const AugmentationConfig& cfg);

/// Applies one sampled augmentation chain. Deterministic per
/// (rng_seed, source_index, view_index).
Tensor augment_view(const ImageSample& sample, const AugmentationConfig& cfg,
                    std::uint64_t rng_seed, std::size_t source_index, int view_index);

ViewPair pretext_views(const ImageSample& sample, const AugmentationConfig& cfg,
                       std::uint64_t rng_seed, std::size_t source_index = 0);

/// Downstream transform: train mode resizes to the target, reflect-pads by
/// 4 px and takes a random crop back to the target; eval mode is a plain
/// deterministic resize. Output CHW in [0,1].
Tensor downstream_transform(const ImageSample& sample, bool train_mode, std::uint64_t rng_seed,
                            int target_size = 224, std::size_t source_index = 0);

/// Per-channel normalization stats, estimated once on a pretext source's
/// train split and carried in checkpoints.
struct ChannelStats {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.25, 0.25, 0.25};
};

void normalize_inplace(Tensor& chw_or_nchw, const ChannelStats& stats);

}  // namespace geossl
