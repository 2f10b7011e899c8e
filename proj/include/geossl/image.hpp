#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geossl/tensor.hpp"

namespace geossl {

/// One decoded image: 8-bit RGB, row-major H x W x 3.
struct ImageSample {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // H*W*3, RGB interleaved
  int label = -1;
  std::filesystem::path source_path;

  std::uint8_t& at(int y, int x, int c) {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

/// Decodes a PNG/JPEG/TIFF file into RGB. Grayscale sources are replicated
/// across the three channels. Throws DecodeError on anything undecodable.
ImageSample load_image(const std::filesystem::path& path);

/// Every load_image call appends its path to `sink` while one is installed
/// (nullptr uninstalls). Returns the previously installed sink so scopes can
/// nest. Single-threaded audit hook for leakage checks, not a general
/// tracing facility.
std::vector<std::filesystem::path>* set_image_access_log(std::vector<std::filesystem::path>* sink);

/// Writes an RGB image as PNG with fixed encoder settings, atomically
/// (temp file + rename) so identical pixels give identical files.
void save_png(const ImageSample& image, const std::filesystem::path& path);

/// [0,1] float CHW view of an 8-bit RGB image.
Tensor image_to_chw(const ImageSample& image);

/// Inverse of image_to_chw for a [3,H,W] tensor, clamping to [0,255].
ImageSample chw_to_image(const Tensor& chw);

}  // namespace geossl
