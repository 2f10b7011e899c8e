#include "geossl/augment.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

namespace {

// Divides like image_to_chw does so an identity chain reproduces it bit for
// bit (convertTo's scale factor rounds differently by one ulp).
cv::Mat sample_to_f32(const ImageSample& sample) {
  cv::Mat f32(sample.height, sample.width, CV_32FC3);
  for (int y = 0; y < sample.height; ++y) {
    auto* row = f32.ptr<cv::Vec3f>(y);
    for (int x = 0; x < sample.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[x][static_cast<int>(c)] = static_cast<float>(sample.at(y, x, c)) / 255.0f;
  }
  return f32;
}

Tensor f32_to_chw(const cv::Mat& m) {
  Tensor t({3, m.rows, m.cols});
  const std::int64_t hw = static_cast<std::int64_t>(m.rows) * m.cols;
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3f>(y);
    for (int x = 0; x < m.cols; ++x) {
      std::int64_t i = static_cast<std::int64_t>(y) * m.cols + x;
      for (int c = 0; c < 3; ++c) {
        float v = row[x][c];
        t.data[static_cast<std::size_t>(c * hw + i)] = std::min(1.0f, std::max(0.0f, v));
      }
    }
  }
  return t;
}

void apply_grayscale(cv::Mat& m) {
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<cv::Vec3f>(y);
    for (int x = 0; x < m.cols; ++x) {
      float luma = 0.299f * row[x][0] + 0.587f * row[x][1] + 0.114f * row[x][2];
      row[x] = cv::Vec3f(luma, luma, luma);
    }
  }
}

}  // namespace

std::vector<std::string> validate_config(const AugmentationConfig& cfg) {
  std::vector<std::string> violations;
  auto check_p = [&](double p, const char* name) {
    if (p < 0.0 || p > 1.0) {
      violations.push_back(std::string(name) + " probability out of range [0,1]");
    }
  };
  check_p(cfg.hflip_p, "hflip_p");
  check_p(cfg.vflip_p, "vflip_p");
  check_p(cfg.grayscale_p, "grayscale_p");
  check_p(cfg.blur_p, "blur_p");
  if (cfg.resize_height <= 0 || cfg.resize_width <= 0) {
    violations.push_back("resize target must be positive");
  }
  if (cfg.blur_kernel < 3) violations.push_back("blur_kernel must be >= 3");
  if (cfg.blur_kernel % 2 == 0) violations.push_back("blur_kernel must be odd");
  if (cfg.rotation_low > cfg.rotation_high) {
    violations.push_back("rotation_range low must be <= high");
  }
  if (cfg.blur_sigma_low <= 0.0 || cfg.blur_sigma_high < cfg.blur_sigma_low) {
    violations.push_back("blur_sigma_range must satisfy 0 < low <= high");
  }
  return violations;
}

Tensor augment_view(const ImageSample& sample, const AugmentationConfig& cfg,
                    std::uint64_t rng_seed, std::size_t source_index, int view_index) {
  auto violations = validate_config(cfg);
  if (!violations.empty()) {
    raise(ErrorCode::InvalidArgument, "augmentation config invalid: " + violations.front());
  }
  Rng rng(derive_seed(rng_seed, {"aug", std::to_string(source_index), std::to_string(view_index)}));
  // Fixed draw schedule regardless of which branches fire.
  const double u_hflip = rng.uniform();
  const double u_vflip = rng.uniform();
  const double angle = rng.uniform(cfg.rotation_low, cfg.rotation_high);
  const double u_gray = rng.uniform();
  const double u_blur = rng.uniform();
  const double sigma = rng.uniform(cfg.blur_sigma_low, cfg.blur_sigma_high);

  cv::Mat m = sample_to_f32(sample);
  cv::resize(m, m, cv::Size(cfg.resize_width, cfg.resize_height), 0, 0, cv::INTER_LINEAR);
  if (u_hflip < cfg.hflip_p) cv::flip(m, m, 1);
  if (u_vflip < cfg.vflip_p) cv::flip(m, m, 0);
  if (std::fabs(angle) > 1e-12) {
    cv::Point2f center((static_cast<float>(m.cols) - 1.0f) / 2.0f,
                       (static_cast<float>(m.rows) - 1.0f) / 2.0f);
    cv::Mat rot = cv::getRotationMatrix2D(center, angle, 1.0);
    int border = cfg.rotation_fill == RotationFill::kReflect ? cv::BORDER_REFLECT_101
                                                             : cv::BORDER_CONSTANT;
    cv::warpAffine(m, m, rot, m.size(), cv::INTER_LINEAR, border, cv::Scalar(0, 0, 0));
  }
  if (u_gray < cfg.grayscale_p) apply_grayscale(m);
  if (u_blur < cfg.blur_p) {
    cv::GaussianBlur(m, m, cv::Size(cfg.blur_kernel, cfg.blur_kernel), sigma, sigma);
  }
  return f32_to_chw(m);
}

ViewPair pretext_views(const ImageSample& sample, const AugmentationConfig& cfg,
                       std::uint64_t rng_seed, std::size_t source_index) {
  ViewPair pair;
  pair.view_a = augment_view(sample, cfg, rng_seed, source_index, 0);
  pair.view_b = augment_view(sample, cfg, rng_seed, source_index, 1);
  pair.source_index = source_index;
  return pair;
}

Tensor downstream_transform(const ImageSample& sample, bool train_mode, std::uint64_t rng_seed,
                            int target_size, std::size_t source_index) {
  if (target_size <= 0) raise(ErrorCode::InvalidArgument, "target_size must be positive");
  cv::Mat m = sample_to_f32(sample);
  cv::resize(m, m, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
  if (train_mode) {
    constexpr int kPad = 4;
    Rng rng(derive_seed(rng_seed, {"downstream_crop", std::to_string(source_index)}));
    int dx = static_cast<int>(rng.below(2 * kPad + 1));
    int dy = static_cast<int>(rng.below(2 * kPad + 1));
    cv::Mat padded;
    cv::copyMakeBorder(m, padded, kPad, kPad, kPad, kPad, cv::BORDER_REFLECT_101);
    m = padded(cv::Rect(dx, dy, target_size, target_size)).clone();
  }
  return f32_to_chw(m);
}

void normalize_inplace(Tensor& t, const ChannelStats& stats) {
  std::size_t offset = 0;
  std::int64_t batch = 1;
  if (t.dims.size() == 4) {
    batch = t.dims[0];
  } else if (t.dims.size() != 3) {
    raise(ErrorCode::InvalidArgument, "normalize expects [3,H,W] or [N,3,H,W]");
  }
  const std::int64_t channels = t.dims[t.dims.size() - 3];
  const std::int64_t hw = t.dims[t.dims.size() - 2] * t.dims[t.dims.size() - 1];
  if (channels != 3) raise(ErrorCode::InvalidArgument, "normalize expects 3 channels");
  for (std::int64_t n = 0; n < batch; ++n) {
    for (int c = 0; c < 3; ++c) {
      const auto mean = static_cast<float>(stats.mean[static_cast<std::size_t>(c)]);
      const auto inv = static_cast<float>(1.0 / std::max(1e-8, stats.stddev[static_cast<std::size_t>(c)]));
      for (std::int64_t i = 0; i < hw; ++i) {
        t.data[offset] = (t.data[offset] - mean) * inv;
        ++offset;
      }
    }
  }
}

}  // namespace geossl
