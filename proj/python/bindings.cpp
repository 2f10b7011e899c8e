// Python bindings for the main operations: contrastive loss, dataset
// scanning and splits, augmentation, metrics, checkpoints, activation maps,
// and the config-driven pipeline entry points. Structured results cross the
// boundary as JSON strings; the geossl package wraps them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "geossl/augment.hpp"
#include "geossl/config.hpp"
#include "geossl/contrastive.hpp"
#include "geossl/dataset.hpp"
#include "geossl/errors.hpp"
#include "geossl/explain.hpp"
#include "geossl/image.hpp"
#include "geossl/metrics.hpp"
#include "geossl/models.hpp"
#include "geossl/prng.hpp"
#include "geossl/runner.hpp"
#include "geossl/splits.hpp"
#include "geossl/tensor.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

geossl::MatrixXd matrix_from_array(const DoubleArray& arr, const char* what) {
  if (arr.ndim() != 2)
    geossl::raise(geossl::ErrorCode::InvalidArgument,
                  std::string(what) + ": expected a 2-D array");
  geossl::MatrixXd M(arr.shape(0), arr.shape(1));
  auto view = arr.unchecked<2>();
  for (py::ssize_t i = 0; i < arr.shape(0); ++i)
    for (py::ssize_t j = 0; j < arr.shape(1); ++j) M(i, j) = view(i, j);
  return M;
}

py::array_t<double> array_from_matrix(const geossl::MatrixXd& M) {
  py::array_t<double> out({M.rows(), M.cols()});
  auto view = out.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) view(i, j) = M(i, j);
  return out;
}

py::array_t<float> array_from_tensor(const geossl::Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
  py::array_t<float> out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

geossl::ImageSample image_from_array(const ByteArray& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3)
    geossl::raise(geossl::ErrorCode::InvalidArgument, "expected an image array [H,W,3] uint8");
  geossl::ImageSample img;
  img.height = static_cast<int>(arr.shape(0));
  img.width = static_cast<int>(arr.shape(1));
  img.pixels.assign(arr.data(), arr.data() + arr.size());
  return img;
}

py::array_t<std::uint8_t> array_from_image(const geossl::ImageSample& img) {
  py::array_t<std::uint8_t> out(
      {static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width),
       static_cast<py::ssize_t>(3)});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

geossl::ProjectionBatch batch_from_array(const DoubleArray& arr, double tau) {
  geossl::ProjectionBatch batch;
  batch.Z = matrix_from_array(arr, "embeddings");
  if (batch.Z.rows() % 2 != 0)
    geossl::raise(geossl::ErrorCode::InvalidArgument,
                  "embeddings must have 2N rows (views of sample n at rows n and n+N)");
  batch.N = static_cast<int>(batch.Z.rows() / 2);
  batch.tau = tau;
  return batch;
}

geossl::LossNormalization norm_from_name(const std::string& name) {
  if (name == "mean_over_pairs") return geossl::LossNormalization::kMeanOverPairs;
  if (name == "strict_over_samples") return geossl::LossNormalization::kStrictOverSamples;
  geossl::raise(geossl::ErrorCode::ConfigError, "unknown normalization: " + name);
}

geossl::RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    geossl::raise(geossl::ErrorCode::ConfigError, std::string("config parse failure: ") + e.what());
  }
  return geossl::parse_run_config(j);
}

geossl::RotationFill fill_from_name(const std::string& name) {
  if (name == "reflect") return geossl::RotationFill::kReflect;
  if (name == "zero") return geossl::RotationFill::kZero;
  geossl::raise(geossl::ErrorCode::ConfigError, "unknown rotation_fill: " + name);
}

json checkpoint_meta_json(const geossl::Checkpoint& ckpt) {
  std::int64_t params = 0;
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    params += t.numel();
    tensors.push_back({{"name", name}, {"shape", t.dims}});
  }
  return json{{"kind", ckpt.meta.kind},
              {"format_version", ckpt.meta.format_version},
              {"source_dataset", ckpt.meta.source_dataset},
              {"seed", ckpt.meta.seed},
              {"epoch", ckpt.meta.epoch},
              {"encoder",
               {{"backbone_id", ckpt.meta.encoder.backbone_id},
                {"feature_dim", ckpt.meta.encoder.feature_dim},
                {"input_size", ckpt.meta.encoder.input_size}}},
              {"normalization",
               {{"mean", ckpt.meta.normalization.mean},
                {"stddev", ckpt.meta.normalization.stddev}}},
              {"tensor_count", ckpt.tensors.size()},
              {"parameter_count", params},
              {"tensors", tensors}};
}

}  // namespace

PYBIND11_MODULE(_geossl, m) {
  m.doc() = "Self-supervised contrastive learning for remote-sensing imagery (C++ core)";
  m.attr("__version__") = "0.1.0";

  py::register_exception<geossl::Error>(m, "Error");

  // ------------------------------------------------------------- hashing
  m.def(
      "fnv1a64", [](const std::string& s) { return geossl::fnv1a64(s); }, py::arg("text"),
      "FNV-1a 64-bit hash of a byte string.");
  m.def(
      "derive_seed",
      [](std::uint64_t master, const std::vector<std::string>& labels) {
        return geossl::derive_seed(master, labels);
      },
      py::arg("master"), py::arg("labels"),
      "Deterministic child seed from a master seed and a label path.");

  // ---------------------------------------------------- contrastive loss
  m.def(
      "nt_xent",
      [](const DoubleArray& embeddings, double tau, const std::string& normalization) {
        auto batch = batch_from_array(embeddings, tau);
        return geossl::nt_xent_batch_loss(batch, norm_from_name(normalization)).value;
      },
      py::arg("embeddings"), py::arg("tau") = 0.5,
      py::arg("normalization") = "mean_over_pairs",
      "NT-Xent loss over a [2N,D] embedding matrix (views of sample n at rows n and n+N).");
  m.def(
      "nt_xent_per_pair",
      [](const DoubleArray& embeddings, double tau, const std::string& normalization) {
        auto batch = batch_from_array(embeddings, tau);
        auto loss = geossl::nt_xent_batch_loss(batch, norm_from_name(normalization));
        return py::array_t<double>(static_cast<py::ssize_t>(loss.per_pair.size()),
                                   loss.per_pair.data());
      },
      py::arg("embeddings"), py::arg("tau") = 0.5,
      py::arg("normalization") = "mean_over_pairs",
      "The 2N ordered pair-loss terms, in row order.");
  m.def(
      "nt_xent_gradient",
      [](const DoubleArray& embeddings, double tau, const std::string& normalization) {
        auto batch = batch_from_array(embeddings, tau);
        return array_from_matrix(geossl::nt_xent_gradient(batch, norm_from_name(normalization)));
      },
      py::arg("embeddings"), py::arg("tau") = 0.5,
      py::arg("normalization") = "mean_over_pairs",
      "Analytic gradient of the NT-Xent loss with respect to the embeddings, [2N,D].");
  m.def(
      "cosine_similarity",
      [](const DoubleArray& embeddings) {
        return array_from_matrix(
            geossl::cosine_similarity_matrix(matrix_from_array(embeddings, "embeddings")));
      },
      py::arg("embeddings"), "Pairwise cosine similarity matrix of the rows.");

  // ------------------------------------------------------------- datasets
  py::class_<geossl::DatasetManifest>(m, "DatasetManifest")
      .def_readonly("dataset_id", &geossl::DatasetManifest::dataset_id)
      .def_readonly("classes", &geossl::DatasetManifest::classes)
      .def_property_readonly("root",
                             [](const geossl::DatasetManifest& mf) { return mf.root.string(); })
      .def_property_readonly("num_classes", &geossl::DatasetManifest::num_classes)
      .def("__len__", &geossl::DatasetManifest::size)
      .def(
          "label_of",
          [](const geossl::DatasetManifest& mf, std::size_t i) {
            return mf.samples.at(i).second;
          },
          py::arg("index"))
      .def(
          "path_of",
          [](const geossl::DatasetManifest& mf, std::size_t i) {
            return mf.samples.at(i).first.string();
          },
          py::arg("index"));

  m.def(
      "scan_dataset",
      [](const std::string& root, const std::string& dataset_id) {
        return geossl::scan_dataset(root, dataset_id);
      },
      py::arg("root"), py::arg("dataset_id") = "dataset",
      "Enumerate a folder-per-class dataset root.");
  m.def(
      "synth_dataset",
      [](const std::string& out_root, int num_classes, int per_class, int image_size,
         std::uint64_t seed, const std::string& layout, const std::string& dataset_id) {
        geossl::SynthParams params;
        params.num_classes = num_classes;
        params.per_class = per_class;
        params.image_size = image_size;
        params.seed = seed;
        if (layout == "full")
          params.layout = geossl::SynthLayout::kFull;
        else if (layout == "quadrant")
          params.layout = geossl::SynthLayout::kQuadrant;
        else
          geossl::raise(geossl::ErrorCode::ConfigError, "unknown layout: " + layout);
        return geossl::synth_dataset(params, out_root, dataset_id);
      },
      py::arg("out_root"), py::arg("num_classes") = 4, py::arg("per_class") = 30,
      py::arg("image_size") = 64, py::arg("seed") = 0, py::arg("layout") = "full",
      py::arg("dataset_id") = "synthetic",
      "Write a deterministic synthetic dataset and return its manifest.");

  // --------------------------------------------------------------- splits
  py::class_<geossl::SplitSpec>(m, "SplitSpec")
      .def_readonly("seed", &geossl::SplitSpec::seed)
      .def_readonly("label_fraction", &geossl::SplitSpec::label_fraction)
      .def_readonly("subsample_seed", &geossl::SplitSpec::subsample_seed)
      .def(
          "indices",
          [](const geossl::SplitSpec& s, const std::string& which) {
            if (which == "train") return s.indices_of(geossl::Split::kTrain);
            if (which == "test") return s.indices_of(geossl::Split::kTest);
            if (which == "val") return s.indices_of(geossl::Split::kVal);
            geossl::raise(geossl::ErrorCode::InvalidArgument,
                          "split must be train, test or val; got " + which);
          },
          py::arg("split"))
      .def("retained_train_indices", &geossl::SplitSpec::retained_train_indices);

  m.def(
      "make_splits",
      [](const geossl::DatasetManifest& manifest, const std::array<double, 3>& ratios,
         std::uint64_t seed) { return geossl::make_splits(manifest, ratios, seed); },
      py::arg("manifest"), py::arg("ratios") = std::array<double, 3>{0.7, 0.2, 0.1},
      py::arg("seed") = 42,
      "Deterministic stratified train/test/val partition of a manifest.");
  m.def("subsample_labels", &geossl::subsample_labels, py::arg("manifest"), py::arg("split"),
        py::arg("fraction"), py::arg("seed"),
        "Per-class label-fraction state; smaller fractions nest inside larger ones.");

  // --------------------------------------------------------------- images
  m.def(
      "load_image",
      [](const std::string& path) { return array_from_image(geossl::load_image(path)); },
      py::arg("path"), "Decode an image file into an [H,W,3] uint8 RGB array.");
  m.def(
      "save_png",
      [](const ByteArray& image, const std::string& path) {
        geossl::save_png(image_from_array(image), path);
      },
      py::arg("image"), py::arg("path"), "Write an [H,W,3] uint8 RGB array as PNG.");

  // --------------------------------------------------------- augmentation
  py::class_<geossl::AugmentationConfig>(m, "AugmentationConfig")
      .def(py::init<>())
      .def_readwrite("resize_height", &geossl::AugmentationConfig::resize_height)
      .def_readwrite("resize_width", &geossl::AugmentationConfig::resize_width)
      .def_readwrite("hflip_p", &geossl::AugmentationConfig::hflip_p)
      .def_readwrite("vflip_p", &geossl::AugmentationConfig::vflip_p)
      .def_readwrite("rotation_low", &geossl::AugmentationConfig::rotation_low)
      .def_readwrite("rotation_high", &geossl::AugmentationConfig::rotation_high)
      .def_readwrite("grayscale_p", &geossl::AugmentationConfig::grayscale_p)
      .def_readwrite("blur_p", &geossl::AugmentationConfig::blur_p)
      .def_readwrite("blur_kernel", &geossl::AugmentationConfig::blur_kernel)
      .def_readwrite("blur_sigma_low", &geossl::AugmentationConfig::blur_sigma_low)
      .def_readwrite("blur_sigma_high", &geossl::AugmentationConfig::blur_sigma_high)
      .def_property(
          "rotation_fill",
          [](const geossl::AugmentationConfig& cfg) {
            return cfg.rotation_fill == geossl::RotationFill::kReflect ? "reflect" : "zero";
          },
          [](geossl::AugmentationConfig& cfg, const std::string& name) {
            cfg.rotation_fill = fill_from_name(name);
          });

  m.def(
      "augment_view",
      [](const ByteArray& image, const geossl::AugmentationConfig& cfg, std::uint64_t seed,
         std::size_t source_index, int view_index) {
        return array_from_tensor(
            geossl::augment_view(image_from_array(image), cfg, seed, source_index, view_index));
      },
      py::arg("image"), py::arg("config") = geossl::AugmentationConfig{}, py::arg("seed") = 0,
      py::arg("source_index") = 0, py::arg("view_index") = 0,
      "One sampled augmentation chain; [3,h,w] float32 in [0,1]. Deterministic per "
      "(seed, source_index, view_index).");
  m.def(
      "pretext_views",
      [](const ByteArray& image, const geossl::AugmentationConfig& cfg, std::uint64_t seed,
         std::size_t source_index) {
        auto pair = geossl::pretext_views(image_from_array(image), cfg, seed, source_index);
        return py::make_tuple(array_from_tensor(pair.view_a), array_from_tensor(pair.view_b));
      },
      py::arg("image"), py::arg("config") = geossl::AugmentationConfig{}, py::arg("seed") = 0,
      py::arg("source_index") = 0,
      "Two independently augmented views of one image, each [3,h,w] float32.");
  m.def(
      "downstream_transform",
      [](const ByteArray& image, bool train_mode, std::uint64_t seed, int target_size,
         std::size_t source_index) {
        return array_from_tensor(geossl::downstream_transform(
            image_from_array(image), train_mode, seed, target_size, source_index));
      },
      py::arg("image"), py::arg("train_mode") = false, py::arg("seed") = 0,
      py::arg("target_size") = 224, py::arg("source_index") = 0,
      "Downstream input transform: train mode pads and random-crops, eval mode resizes.");

  // -------------------------------------------------------------- metrics
  m.def(
      "evaluate_json",
      [](const std::vector<int>& pred, const std::vector<int>& truth, int num_classes,
         const std::vector<double>& scores) {
        return geossl::metrics_to_json(geossl::evaluate(pred, truth, num_classes, scores));
      },
      py::arg("pred"), py::arg("truth"), py::arg("num_classes"),
      py::arg("scores") = std::vector<double>{},
      "Accuracy, macro precision/recall/F1 and (with scores, row-major n*C) one-vs-rest AUC, "
      "as a JSON string.");

  // ---------------------------------------------------------- checkpoints
  m.def(
      "checkpoint_info_json",
      [](const std::string& path) {
        return checkpoint_meta_json(geossl::load_checkpoint(path)).dump();
      },
      py::arg("path"), "Checkpoint header and tensor inventory as a JSON string.");

  // ------------------------------------------------------ activation maps
  m.def(
      "activation_map",
      [](const std::string& checkpoint_path, const std::string& image_path, int class_index,
         int tap) {
        auto ckpt = geossl::load_checkpoint(checkpoint_path);
        auto model = geossl::downstream_from_checkpoint(ckpt, geossl::DownstreamMode::kFinetune);
        auto image = geossl::load_image(image_path);
        const int target =
            class_index < 0 ? geossl::predict_class(*model, image) : class_index;
        auto heat = geossl::activation_map(*model, image, target, tap);
        py::array_t<float> out(
            {static_cast<py::ssize_t>(heat.height), static_cast<py::ssize_t>(heat.width)});
        std::copy(heat.values.begin(), heat.values.end(), out.mutable_data());
        return py::make_tuple(out, target);
      },
      py::arg("checkpoint_path"), py::arg("image_path"), py::arg("class_index") = -1,
      py::arg("tap") = -1,
      "Class-activation heatmap ([H,W] float32 in [0,1]) and the explained class. A negative "
      "class index explains the model's own prediction.");
  m.def(
      "cam_overlay",
      [](const std::string& checkpoint_path, const std::string& image_path,
         const std::string& out_path, int class_index, const std::string& colormap, int tap) {
        auto ckpt = geossl::load_checkpoint(checkpoint_path);
        auto model = geossl::downstream_from_checkpoint(ckpt, geossl::DownstreamMode::kFinetune);
        auto image = geossl::load_image(image_path);
        const int target =
            class_index < 0 ? geossl::predict_class(*model, image) : class_index;
        auto heat = geossl::activation_map(*model, image, target, tap);
        geossl::overlay(heat, image, out_path, colormap);
        return target;
      },
      py::arg("checkpoint_path"), py::arg("image_path"), py::arg("out_path"),
      py::arg("class_index") = -1, py::arg("colormap") = "jet", py::arg("tap") = -1,
      "Write a colormapped CAM overlay PNG; returns the explained class.");

  // --------------------------------------------------- pipeline (configs)
  m.def(
      "config_digest",
      [](const std::string& config_json) {
        return geossl::run_config_digest(config_from_json_text(config_json));
      },
      py::arg("config_json"),
      "Canonical digest of a run config (insensitive to key order, sensitive to values).");
  m.def(
      "plan_cells_json",
      [](const std::string& config_json) {
        auto cfg = config_from_json_text(config_json);
        json cells = json::array();
        for (const auto& cell : geossl::plan_from_config(cfg)) {
          cells.push_back({{"pretext", cell.pretext_dataset},
                           {"downstream", cell.downstream_dataset},
                           {"fraction", cell.fraction},
                           {"mode", cell.mode},
                           {"seeds", cell.seeds},
                           {"digest", geossl::cell_cache_digest(cfg, cell)}});
        }
        return cells.dump();
      },
      py::arg("config_json"), "The experiment cells the config's matrix expands to, as JSON.");
  m.def(
      "pretrain",
      [](const std::string& config_json, const std::string& dataset_id) {
        auto cfg = config_from_json_text(config_json);
        geossl::validate_run_config_paths(cfg);
        geossl::PretextArtifact artifact;
        {
          py::gil_scoped_release release;
          artifact = geossl::ensure_pretext(cfg, dataset_id);
        }
        return json{{"dataset", dataset_id},
                    {"digest", artifact.digest},
                    {"checkpoint", artifact.checkpoint_path.generic_string()},
                    {"trained", artifact.trained}}
            .dump();
      },
      py::arg("config_json"), py::arg("dataset_id"),
      "Contrastive pretext training for one dataset (cached by digest); result as JSON.");
  m.def(
      "run_downstream",
      [](const std::string& config_json, const std::string& source, const std::string& target,
         double fraction, const std::string& mode, std::uint64_t seed) {
        auto cfg = config_from_json_text(config_json);
        geossl::validate_run_config_paths(cfg);
        geossl::DownstreamArtifact artifact;
        {
          py::gil_scoped_release release;
          artifact = geossl::run_downstream(cfg, source, target, fraction, mode, seed);
        }
        return json{{"digest", artifact.digest},
                    {"checkpoint", artifact.checkpoint_path.generic_string()},
                    {"metrics", json::parse(geossl::metrics_to_json(artifact.report))}}
            .dump();
      },
      py::arg("config_json"), py::arg("source"), py::arg("target"), py::arg("fraction") = 1.0,
      py::arg("mode") = "linear", py::arg("seed") = 1,
      "Train one downstream cell, saving checkpoint and metrics under output_dir; result as "
      "JSON.");
  m.def(
      "run_matrix",
      [](const std::string& config_json) {
        auto cfg = config_from_json_text(config_json);
        geossl::validate_run_config_paths(cfg);
        auto plan = geossl::plan_from_config(cfg);
        geossl::AdaptationMatrix matrix;
        {
          py::gil_scoped_release release;
          matrix = geossl::run_matrix(cfg, plan);
        }
        return geossl::matrix_to_json(matrix).dump();
      },
      py::arg("config_json"),
      "Run the full adaptation matrix from a config; the matrix as a JSON string.");
  m.def(
      "render_report",
      [](const std::string& matrix_json, const std::string& format,
         const std::string& published_json) {
        auto matrix = geossl::matrix_from_json(json::parse(matrix_json));
        if (published_json.empty()) return geossl::render_report(matrix, format);
        json published = json::parse(published_json);
        return geossl::render_report(matrix, format, &published);
      },
      py::arg("matrix_json"), py::arg("format") = "markdown", py::arg("published_json") = "",
      "Render a matrix as csv or markdown; published reference values stay clearly separated.");
}
