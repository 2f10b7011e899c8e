#include "geossl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "geossl/errors.hpp"
#include "geossl/prng.hpp"

namespace geossl {

namespace fs = std::filesystem;

std::vector<std::size_t> DatasetManifest::class_sample_indices(int class_index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].second == class_index) out.push_back(i);
  }
  return out;
}

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff";
}

void check_csv_field(const std::string& field) {
  if (field.find(',') != std::string::npos || field.find('\n') != std::string::npos) {
    raise(ErrorCode::FormatError, "field contains a comma or newline: " + field);
  }
}

// Small HSV (h in degrees) to RGB helper for the synthetic generator.
std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
  double c = v * s;
  double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  double m = v - c;
  double r = 0, g = 0, b = 0;
  if (h < 60) { r = c; g = x; }
  else if (h < 120) { r = x; g = c; }
  else if (h < 180) { g = c; b = x; }
  else if (h < 240) { g = x; b = c; }
  else if (h < 300) { r = x; b = c; }
  else { r = c; b = x; }
  return {r + m, g + m, b + m};
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

void validate_synth_params(const SynthParams& p) {
  if (p.num_classes < 2) raise(ErrorCode::InvalidArgument, "synth needs >= 2 classes");
  if (p.per_class < 6) raise(ErrorCode::InvalidArgument, "synth needs >= 6 images per class");
  if (p.image_size < 32) raise(ErrorCode::InvalidArgument, "synth needs image_size >= 32");
}

}  // namespace

DatasetManifest scan_dataset(const fs::path& root, const std::string& dataset_id,
                             ScanWarnings* warnings) {
  if (!fs::exists(root) || !fs::is_directory(root)) {
    raise(ErrorCode::NotFound, "dataset root does not exist: " + root.string());
  }
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    raise(ErrorCode::NotFound, "no class subdirectories under " + root.string());
  }

  DatasetManifest manifest;
  manifest.dataset_id = dataset_id;
  manifest.root = fs::absolute(root);
  manifest.classes = classes;

  for (int ci = 0; ci < static_cast<int>(classes.size()); ++ci) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / classes[static_cast<std::size_t>(ci)])) {
      if (entry.is_regular_file() && has_image_extension(entry.path())) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::size_t kept = 0;
    for (const auto& file : files) {
      try {
        ImageSample img = load_image(file);
        if (manifest.image_size_hint.first == 0) {
          manifest.image_size_hint = {img.height, img.width};
        }
        manifest.samples.emplace_back(fs::absolute(file), ci);
        ++kept;
      } catch (const Error& e) {
        if (warnings) warnings->skipped_files.push_back(file.string() + " (" + e.what() + ")");
      }
    }
    if (kept == 0) {
      raise(ErrorCode::EmptyClass, "class has no decodable image: " + classes[static_cast<std::size_t>(ci)]);
    }
  }
  return manifest;
}

ImageSample synth_image(const SynthParams& params, int class_index, int image_index) {
  validate_synth_params(params);
  const int s = params.image_size;
  Rng rng(derive_seed(params.seed, {"synth", std::to_string(class_index), std::to_string(image_index)}));

  // 12 well separated hues; classes beyond 12 reuse hues with another texture.
  const double hue = 30.0 * (class_index % 12) + rng.uniform(-6.0, 6.0);
  const int pattern = class_index % 4;
  const double brightness = rng.uniform(0.9, 1.1);
  const int period = std::max(4, s / 8);
  const int phase_x = static_cast<int>(rng.below(static_cast<std::uint64_t>(period)));
  const int phase_y = static_cast<int>(rng.below(static_cast<std::uint64_t>(period)));

  const int region = params.layout == SynthLayout::kQuadrant ? s / 2 : s;
  const double cx = region / 2.0, cy = region / 2.0;

  ImageSample img;
  img.height = s;
  img.width = s;
  img.label = class_index;
  img.pixels.assign(static_cast<std::size_t>(s) * s * 3, 0);

  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      bool in_region = (y < region) && (x < region);
      double r, g, b;
      if (in_region) {
        double mask;
        switch (pattern) {
          case 0: mask = ((y + phase_y) / (period / 2) % 2 == 0) ? 1.0 : 0.0; break;
          case 1: mask = ((x + phase_x) / (period / 2) % 2 == 0) ? 1.0 : 0.0; break;
          case 2: mask = (((x + phase_x) / (period / 2) + (y + phase_y) / (period / 2)) % 2 == 0) ? 1.0 : 0.0; break;
          default: {
            double d = std::hypot(x - cx, y - cy);
            mask = (static_cast<int>(d + phase_x) / (period / 2) % 2 == 0) ? 1.0 : 0.0;
          }
        }
        auto rgb = hsv_to_rgb(hue, 0.85, brightness * (0.55 + 0.35 * mask));
        r = rgb[0] * 255.0 + rng.normal(0.0, 8.0);
        g = rgb[1] * 255.0 + rng.normal(0.0, 8.0);
        b = rgb[2] * 255.0 + rng.normal(0.0, 8.0);
      } else {
        double base = 110.0 + rng.normal(0.0, 14.0);
        r = base + rng.normal(0.0, 6.0);
        g = base + rng.normal(0.0, 6.0);
        b = base + rng.normal(0.0, 6.0);
      }
      img.at(y, x, 0) = clamp_u8(r);
      img.at(y, x, 1) = clamp_u8(g);
      img.at(y, x, 2) = clamp_u8(b);
    }
  }
  return img;
}

DatasetManifest synth_dataset(const SynthParams& params, const fs::path& out_root,
                              const std::string& dataset_id) {
  validate_synth_params(params);
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec || !fs::is_directory(out_root)) {
    raise(ErrorCode::IoError, "cannot create " + out_root.string());
  }
  for (int ci = 0; ci < params.num_classes; ++ci) {
    char cname[32];
    std::snprintf(cname, sizeof(cname), "class%02d", ci);
    fs::path class_dir = out_root / cname;
    fs::create_directories(class_dir, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create " + class_dir.string());
    for (int ii = 0; ii < params.per_class; ++ii) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "img_%03d.png", ii);
      save_png(synth_image(params, ci, ii), class_dir / fname);
    }
  }
  return scan_dataset(out_root, dataset_id);
}

void write_manifest_csv(const DatasetManifest& manifest, const fs::path& path) {
  std::ostringstream out;
  out << "# geossl-manifest v1\n";
  out << "# dataset_id=" << manifest.dataset_id << "\n";
  out << "# root=" << manifest.root.generic_string() << "\n";
  out << "# image_size_hint=" << manifest.image_size_hint.first << ","
      << manifest.image_size_hint.second << "\n";
  out << "path,class_name,class_index\n";
  for (const auto& [sample_path, ci] : manifest.samples) {
    std::string rel = fs::relative(sample_path, manifest.root).generic_string();
    check_csv_field(rel);
    out << rel << "," << manifest.classes[static_cast<std::size_t>(ci)] << "," << ci << "\n";
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

DatasetManifest read_manifest_csv(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorCode::NotFound, "cannot open manifest: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "# geossl-manifest v1") {
    raise(ErrorCode::VersionError, "unrecognized manifest header in " + path.string());
  }
  DatasetManifest manifest;
  std::set<std::string> class_set;
  std::vector<std::pair<std::string, int>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(2, eq - 2);
      std::string value = line.substr(eq + 1);
      if (key == "dataset_id") manifest.dataset_id = value;
      else if (key == "root") manifest.root = value;
      else if (key == "image_size_hint") {
        auto comma = value.find(',');
        if (comma == std::string::npos) raise(ErrorCode::FormatError, "bad image_size_hint");
        manifest.image_size_hint = {std::stoi(value.substr(0, comma)), std::stoi(value.substr(comma + 1))};
      }
      continue;
    }
    if (line == "path,class_name,class_index") continue;
    std::stringstream ss(line);
    std::string rel, cname, cidx;
    if (!std::getline(ss, rel, ',') || !std::getline(ss, cname, ',') || !std::getline(ss, cidx)) {
      raise(ErrorCode::FormatError, "bad manifest row: " + line);
    }
    rows.emplace_back(rel, std::stoi(cidx));
    class_set.insert(cname);
  }
  manifest.classes.assign(class_set.begin(), class_set.end());
  for (const auto& [rel, ci] : rows) {
    if (ci < 0 || ci >= static_cast<int>(manifest.classes.size())) {
      raise(ErrorCode::FormatError, "class_index out of range in manifest row");
    }
    manifest.samples.emplace_back(manifest.root / rel, ci);
  }
  if (manifest.samples.empty()) raise(ErrorCode::FormatError, "manifest has no samples");
  return manifest;
}

std::filesystem::path data_root_from_env() {
  const char* v = std::getenv("GEOSSL_DATA_ROOT");
  return v ? fs::path(v) : fs::path();
}

}  // namespace geossl
