#include "geossl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "geossl/errors.hpp"

namespace geossl {

using json = nlohmann::json;

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          int num_classes) {
  if (pred.size() != truth.size()) {
    raise(ErrorCode::InvalidArgument, "pred and truth lengths differ");
  }
  if (pred.empty()) raise(ErrorCode::InvalidArgument, "empty prediction set");
  if (num_classes < 1) raise(ErrorCode::InvalidArgument, "num_classes must be >= 1");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes) {
      raise(ErrorCode::InvalidArgument,
            "label out of range at sample " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(truth[i]) * num_classes + pred[i]];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) raise(ErrorCode::InvalidArgument, "empty confusion matrix");
  std::int64_t trace = 0;
  for (int c = 0; c < cm.num_classes; ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) raise(ErrorCode::InvalidArgument, "empty confusion matrix");
  const int C = cm.num_classes;
  MetricsReport r;
  r.n_samples = total;
  r.accuracy = accuracy(cm);
  r.per_class_precision.assign(static_cast<std::size_t>(C), 0.0);
  r.per_class_recall.assign(static_cast<std::size_t>(C), 0.0);
  r.per_class_f1.assign(static_cast<std::size_t>(C), 0.0);

  double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
  int recall_classes = 0;
  for (int c = 0; c < C; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < C; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::int64_t predicted = tp + fp;
    const std::int64_t support = tp + fn;
    double p = 0.0;
    if (predicted > 0) {
      p = static_cast<double>(tp) / static_cast<double>(predicted);
    } else {
      r.zero_predicted_classes.push_back(c);
    }
    r.per_class_precision[static_cast<std::size_t>(c)] = p;
    precision_sum += p;  // zero-predicted class counts as 0

    if (support > 0) {
      const double rec = static_cast<double>(tp) / static_cast<double>(support);
      r.per_class_recall[static_cast<std::size_t>(c)] = rec;
      recall_sum += rec;
      const double f = (p + rec) > 0.0 ? 2.0 * p * rec / (p + rec) : 0.0;
      r.per_class_f1[static_cast<std::size_t>(c)] = f;
      f1_sum += f;
      ++recall_classes;
    } else {
      r.zero_support_classes.push_back(c);
    }
  }
  r.precision = precision_sum / static_cast<double>(C);
  if (recall_classes == 0) raise(ErrorCode::Undefined, "no class has true members");
  r.recall = recall_sum / static_cast<double>(recall_classes);
  r.f1 = f1_sum / static_cast<double>(recall_classes);
  return r;
}

double precision_macro(const ConfusionMatrix& cm) { return compute_metrics(cm).precision; }
double recall_macro(const ConfusionMatrix& cm) { return compute_metrics(cm).recall; }
double f1_macro(const ConfusionMatrix& cm) { return compute_metrics(cm).f1; }

double auc_ovr(const std::vector<double>& scores, std::int64_t n, int num_classes,
               const std::vector<int>& truth) {
  if (n <= 0 || num_classes < 1) raise(ErrorCode::InvalidArgument, "empty score matrix");
  if (scores.size() != static_cast<std::size_t>(n) * num_classes) {
    raise(ErrorCode::InvalidArgument, "score matrix shape mismatch");
  }
  if (truth.size() != static_cast<std::size_t>(n)) {
    raise(ErrorCode::InvalidArgument, "truth length mismatch");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) raise(ErrorCode::InvalidArgument, "non-finite score");
  }

  double auc_sum = 0.0;
  int eligible = 0;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::vector<double> rank(static_cast<std::size_t>(n));
  for (int c = 0; c < num_classes; ++c) {
    std::int64_t n_pos = 0;
    for (std::int64_t i = 0; i < n; ++i) n_pos += truth[static_cast<std::size_t>(i)] == c;
    const std::int64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) continue;

    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      return scores[static_cast<std::size_t>(a * num_classes + c)] <
             scores[static_cast<std::size_t>(b * num_classes + c)];
    });
    // Average ranks across ties (1-based).
    std::int64_t i = 0;
    while (i < n) {
      std::int64_t j = i;
      const double v = scores[static_cast<std::size_t>(order[static_cast<std::size_t>(i)] * num_classes + c)];
      while (j + 1 < n &&
             scores[static_cast<std::size_t>(order[static_cast<std::size_t>(j + 1)] * num_classes + c)] == v) {
        ++j;
      }
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::int64_t t = i; t <= j; ++t) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = avg;
      i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::int64_t s = 0; s < n; ++s) {
      if (truth[static_cast<std::size_t>(s)] == c) pos_rank_sum += rank[static_cast<std::size_t>(s)];
    }
    const double auc_c =
        (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
        (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    auc_sum += auc_c;
    ++eligible;
  }
  if (eligible == 0) {
    raise(ErrorCode::Undefined, "AUC undefined: every class lacks positives or negatives");
  }
  return auc_sum / static_cast<double>(eligible);
}

MetricsReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth,
                       int num_classes, const std::vector<double>& scores) {
  MetricsReport r = compute_metrics(confusion(pred, truth, num_classes));
  if (!scores.empty()) {
    r.auc = auc_ovr(scores, static_cast<std::int64_t>(truth.size()), num_classes, truth);
    r.has_auc = true;
  }
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc"] = r.has_auc ? json(r.auc) : json(nullptr);
  j["averaging"] = r.averaging;
  j["n_samples"] = r.n_samples;
  j["per_class"] = {{"precision", r.per_class_precision},
                    {"recall", r.per_class_recall},
                    {"f1", r.per_class_f1}};
  j["flags"] = {{"zero_predicted", r.zero_predicted_classes},
                {"zero_support", r.zero_support_classes}};
  return j.dump();
}

MetricsReport metrics_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError, "bad metrics JSON: " + std::string(e.what()));
  }
  MetricsReport r;
  try {
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    if (!j.at("auc").is_null()) {
      r.auc = j["auc"].get<double>();
      r.has_auc = true;
    }
    r.averaging = j.at("averaging").get<std::string>();
    r.n_samples = j.at("n_samples").get<std::int64_t>();
    r.per_class_precision = j.at("per_class").at("precision").get<std::vector<double>>();
    r.per_class_recall = j.at("per_class").at("recall").get<std::vector<double>>();
    r.per_class_f1 = j.at("per_class").at("f1").get<std::vector<double>>();
    r.zero_predicted_classes = j.at("flags").at("zero_predicted").get<std::vector<int>>();
    r.zero_support_classes = j.at("flags").at("zero_support").get<std::vector<int>>();
  } catch (const json::exception& e) {
    raise(ErrorCode::FormatError, "metrics JSON schema violation: " + std::string(e.what()));
  }
  return r;
}

}  // namespace geossl
