#include "geossl/splits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kVal: return "val";
  }
  return "?";
}

std::vector<std::size_t> SplitSpec::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SplitSpec::retained_train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    if (retained[i]) out.push_back(i);
  }
  return out;
}

namespace {

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

// Class-specific ranking of the train indices; the same ranking serves every
// fraction under one seed, so retained sets nest as prefixes.
std::vector<std::size_t> ranked_train_of_class(const DatasetManifest& manifest,
                                               const SplitSpec& split, int class_index,
                                               std::uint64_t seed) {
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    if (manifest.samples[i].second == class_index && split.assignment[i] == Split::kTrain) {
      train.push_back(i);
    }
  }
  Rng rng(derive_seed(seed, {"subsample", manifest.dataset_id,
                             manifest.classes[static_cast<std::size_t>(class_index)]}));
  rng.shuffle(train);
  return train;
}

}  // namespace

SplitSpec make_splits(const DatasetManifest& manifest, std::array<double, 3> ratios,
                      std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::fabs(sum - 1.0) > 1e-9) {
    raise(ErrorCode::InvalidArgument, "split ratios must be positive and sum to 1");
  }
  if (manifest.samples.empty()) raise(ErrorCode::InvalidArgument, "manifest has no samples");

  SplitSpec spec;
  spec.manifest_ref = manifest.dataset_id;
  spec.seed = seed;
  spec.ratios = ratios;
  spec.assignment.assign(manifest.samples.size(), Split::kVal);

  for (int ci = 0; ci < manifest.num_classes(); ++ci) {
    auto indices = manifest.class_sample_indices(ci);
    auto n = static_cast<std::int64_t>(indices.size());
    if (n < 3) {
      raise(ErrorCode::StratificationError,
            "class " + manifest.classes[static_cast<std::size_t>(ci)] +
                " has fewer than 3 samples; cannot place one sample in each split");
    }
    std::int64_t n_train = round_half_up(ratios[0] * static_cast<double>(n));
    std::int64_t n_test = round_half_up(ratios[1] * static_cast<double>(n));

    Rng rng(derive_seed(seed, {"split", manifest.dataset_id,
                               manifest.classes[static_cast<std::size_t>(ci)]}));
    rng.shuffle(indices);
    for (std::int64_t k = 0; k < n; ++k) {
      Split s = k < n_train ? Split::kTrain : (k < n_train + n_test ? Split::kTest : Split::kVal);
      spec.assignment[indices[static_cast<std::size_t>(k)]] = s;
    }
  }

  spec.label_fraction = 1.0;
  spec.subsample_seed = seed;
  spec.retained.assign(manifest.samples.size(), 0);
  for (std::size_t i = 0; i < spec.assignment.size(); ++i) {
    if (spec.assignment[i] == Split::kTrain) spec.retained[i] = 1;
  }
  return spec;
}

SplitSpec subsample_labels(const DatasetManifest& manifest, const SplitSpec& split,
                           double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    raise(ErrorCode::InvalidFraction, "label fraction must be in (0, 1]");
  }
  if (split.assignment.size() != manifest.samples.size()) {
    raise(ErrorCode::InvalidArgument, "split does not match manifest");
  }
  SplitSpec out = split;
  out.label_fraction = fraction;
  out.subsample_seed = seed;
  out.retained.assign(manifest.samples.size(), 0);
  for (int ci = 0; ci < manifest.num_classes(); ++ci) {
    auto ranked = ranked_train_of_class(manifest, split, ci, seed);
    if (ranked.empty()) continue;
    auto keep = static_cast<std::size_t>(std::max<std::int64_t>(
        1, round_half_up(fraction * static_cast<double>(ranked.size()))));
    keep = std::min(keep, ranked.size());
    for (std::size_t k = 0; k < keep; ++k) out.retained[ranked[k]] = 1;
  }
  return out;
}

void write_splitspec_csv(const SplitSpec& split, const DatasetManifest& manifest,
                         const fs::path& path) {
  if (split.assignment.size() != manifest.samples.size()) {
    raise(ErrorCode::InvalidArgument, "split does not match manifest");
  }
  char ratio_buf[96];
  std::snprintf(ratio_buf, sizeof(ratio_buf), "%.17g,%.17g,%.17g", split.ratios[0],
                split.ratios[1], split.ratios[2]);
  char frac_buf[32];
  std::snprintf(frac_buf, sizeof(frac_buf), "%.17g", split.label_fraction);

  std::ostringstream out;
  out << "# geossl-splitspec v1\n";
  out << "# dataset_id=" << split.manifest_ref << "\n";
  out << "# seed=" << split.seed << "\n";
  out << "# ratios=" << ratio_buf << "\n";
  out << "# label_fraction=" << frac_buf << "\n";
  out << "# subsample_seed=" << split.subsample_seed << "\n";
  out << "path,split,retained\n";
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    std::string rel = fs::relative(manifest.samples[i].first, manifest.root).generic_string();
    out << rel << "," << split_name(split.assignment[i]) << ","
        << static_cast<int>(split.retained[i]) << "\n";
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorCode::IoError, "cannot open " + tmp.string());
    f << out.str();
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::IoError, "rename failed for " + path.string());
}

SplitSpec read_splitspec_csv(const fs::path& path, const DatasetManifest& manifest) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorCode::NotFound, "cannot open splitspec: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "# geossl-splitspec v1") {
    raise(ErrorCode::VersionError, "unrecognized splitspec header in " + path.string());
  }
  SplitSpec spec;
  spec.assignment.assign(manifest.samples.size(), Split::kVal);
  spec.retained.assign(manifest.samples.size(), 0);

  std::map<std::string, std::size_t> index_by_rel;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    index_by_rel[fs::relative(manifest.samples[i].first, manifest.root).generic_string()] = i;
  }

  std::size_t rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(2, eq - 2);
      std::string value = line.substr(eq + 1);
      if (key == "dataset_id") spec.manifest_ref = value;
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "subsample_seed") spec.subsample_seed = std::stoull(value);
      else if (key == "label_fraction") spec.label_fraction = std::stod(value);
      else if (key == "ratios") {
        std::stringstream ss(value);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c);
        spec.ratios = {std::stod(a), std::stod(b), std::stod(c)};
      }
      continue;
    }
    if (line == "path,split,retained") continue;
    std::stringstream ss(line);
    std::string rel, sname, ret;
    if (!std::getline(ss, rel, ',') || !std::getline(ss, sname, ',') || !std::getline(ss, ret)) {
      raise(ErrorCode::FormatError, "bad splitspec row: " + line);
    }
    auto it = index_by_rel.find(rel);
    if (it == index_by_rel.end()) {
      raise(ErrorCode::FormatError, "splitspec row does not match manifest: " + rel);
    }
    Split s;
    if (sname == "train") s = Split::kTrain;
    else if (sname == "test") s = Split::kTest;
    else if (sname == "val") s = Split::kVal;
    else raise(ErrorCode::FormatError, "bad split name: " + sname);
    spec.assignment[it->second] = s;
    spec.retained[it->second] = ret == "1" ? 1 : 0;
    ++rows;
  }
  if (rows != manifest.samples.size()) {
    raise(ErrorCode::FormatError, "splitspec row count does not match manifest");
  }
  if (spec.manifest_ref != manifest.dataset_id) {
    raise(ErrorCode::FormatError, "splitspec dataset_id does not match manifest");
  }
  return spec;
}

}  // namespace geossl
