#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "geossl/dataset.hpp"

namespace geossl {

enum class Split : std::uint8_t { kTrain = 0, kTest = 1, kVal = 2 };

const char* split_name(Split s);

/// Deterministic stratified partition of one manifest, plus the label
/// fraction state for the downstream task. Rounding rule, per class of n
/// samples: train = floor(r_train*n + 0.5), test = floor(r_test*n + 0.5),
/// val = remainder. Retained per class = max(1, floor(fraction*|train| + 0.5)),
/// taken as a prefix of a per-seed class ranking so smaller fractions nest
/// inside larger ones.
struct SplitSpec {
  std::string manifest_ref;  // dataset_id
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.7, 0.2, 0.1};
  std::vector<Split> assignment;           // sample_index -> split
  double label_fraction = 1.0;
  std::uint64_t subsample_seed = 0;
  std::vector<std::uint8_t> retained;      // sample_index -> in retained_train

  std::vector<std::size_t> indices_of(Split s) const;
  std::vector<std::size_t> retained_train_indices() const;
};

SplitSpec make_splits(const DatasetManifest& manifest, std::array<double, 3> ratios,
                      std::uint64_t seed);

SplitSpec subsample_labels(const DatasetManifest& manifest, const SplitSpec& split,
                           double fraction, std::uint64_t seed);

void write_splitspec_csv(const SplitSpec& split, const DatasetManifest& manifest,
                         const std::filesystem::path& path);
SplitSpec read_splitspec_csv(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace geossl
