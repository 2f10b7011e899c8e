#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geossl {

/// rows = true class, cols = predicted class.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;  // row-major C×C

  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  std::int64_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          int num_classes);

/// Macro-averaged scores with the zero-denominator conventions spelled out:
/// a class nothing was predicted as keeps precision 0 and stays in the
/// macro average (listed in zero_predicted_classes); a class with no true
/// members is dropped from the recall and F1 averages (zero_support_classes).
struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  bool has_auc = false;
  std::string averaging = "macro";
  std::int64_t n_samples = 0;
  std::vector<double> per_class_precision;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_f1;
  std::vector<int> zero_predicted_classes;
  std::vector<int> zero_support_classes;
};

double accuracy(const ConfusionMatrix& cm);
double precision_macro(const ConfusionMatrix& cm);
double recall_macro(const ConfusionMatrix& cm);
double f1_macro(const ConfusionMatrix& cm);

MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// One-vs-rest ROC-AUC from class scores, macro-averaged via the
/// Mann–Whitney rank statistic (ties contribute 1/2). Classes missing a
/// positive or a negative example are skipped; if every class is skipped
/// (single-class truth) the value is undefined and an error is raised.
double auc_ovr(const std::vector<double>& scores, std::int64_t n, int num_classes,
               const std::vector<int>& truth);

/// Confusion + macro metrics + AUC in one pass; scores may be empty to skip
/// AUC (scores are row-major n×C when given).
MetricsReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth,
                       int num_classes, const std::vector<double>& scores = {});

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

}  // namespace geossl
