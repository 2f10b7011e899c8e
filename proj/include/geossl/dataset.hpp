#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "geossl/image.hpp"

namespace geossl {

/// Enumerates one folder-per-class dataset root: class names (sorted,
/// unique), every image path, and a size hint from the first image.
struct DatasetManifest {
  std::string dataset_id;
  std::filesystem::path root;
  std::vector<std::string> classes;
  std::vector<std::pair<std::filesystem::path, int>> samples;  // (path, class_index)
  std::pair<int, int> image_size_hint{0, 0};                   // (height, width)

  std::size_t size() const { return samples.size(); }
  int num_classes() const { return static_cast<int>(classes.size()); }
  std::vector<std::size_t> class_sample_indices(int class_index) const;
};

struct ScanWarnings {
  std::vector<std::string> skipped_files;  // undecodable, with reason
};

/// Walks `root/<class_name>/<image>.{png,jpg,jpeg,tif,tiff}`. Classes are the
/// subdirectory names in lexicographic order. Undecodable files are skipped
/// and reported through `warnings`; a class left with no decodable image is
/// an error.
DatasetManifest scan_dataset(const std::filesystem::path& root, const std::string& dataset_id,
                             ScanWarnings* warnings = nullptr);

enum class SynthLayout {
  kFull,      // class signature drawn over the whole image
  kQuadrant,  // signature confined to the top-left quadrant, noise elsewhere
};

struct SynthParams {
  int num_classes = 4;
  int per_class = 30;
  int image_size = 64;
  std::uint64_t seed = 0;
  SynthLayout layout = SynthLayout::kFull;
};

/// Writes a deterministic synthetic dataset under out_root (folder per
/// class) and returns the manifest from re-scanning it. Class k gets a
/// distinct dominant hue plus a class-specific geometric texture, with
/// per-image jitter in phase, brightness and pixel noise.
DatasetManifest synth_dataset(const SynthParams& params, const std::filesystem::path& out_root,
                              const std::string& dataset_id = "synthetic");

/// Renders one synthetic image; exposed so tests can probe the generator.
ImageSample synth_image(const SynthParams& params, int class_index, int image_index);

void write_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest_csv(const std::filesystem::path& path);

/// Default search root for relative dataset paths (env GEOSSL_DATA_ROOT).
std::filesystem::path data_root_from_env();

}  // namespace geossl
