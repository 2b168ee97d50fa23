#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfeia/errors.hpp"

#include <json.hpp>

namespace dfeia {

// K x K integer counts, rows are true classes and columns predictions.
// Per-class TP/FP/FN/TN derive one-vs-rest from the matrix.
struct ConfusionCounts {
  explicit ConfusionCounts(int num_classes)
      : k(num_classes), m(static_cast<size_t>(num_classes) * num_classes, 0) {
    if (num_classes < 2) throw ConfigError("confusion matrix needs at least 2 classes");
  }

  int k;
  std::vector<int64_t> m;  // row-major

  int64_t& at(int truth, int pred) { return m[static_cast<size_t>(truth) * k + pred]; }
  int64_t at(int truth, int pred) const { return m[static_cast<size_t>(truth) * k + pred]; }

  void add(int truth, int pred) {
    if (truth < 0 || truth >= k || pred < 0 || pred >= k) {
      throw UsageError("confusion matrix index out of range");
    }
    ++at(truth, pred);
  }

  int64_t total() const;
  int64_t tp(int c) const { return at(c, c); }
  int64_t fp(int c) const;  // predicted c but true class differs
  int64_t fn(int c) const;  // true class c predicted as something else
  int64_t tn(int c) const { return total() - tp(c) - fp(c) - fn(c); }
};

struct ClassMetrics {
  std::string name;
  double precision = 0, recall = 0, specificity = 0, f1 = 0;
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct MacroMetrics {
  double precision = 0, recall = 0, specificity = 0, f1 = 0;
};

struct MetricsReport {
  double accuracy = 0;  // global top-1 = trace / total
  std::vector<ClassMetrics> per_class;
  MacroMetrics macro;  // unweighted mean over classes
  ConfusionCounts confusion;
};

// Zero-denominator metrics are defined as 0 so reports stay total.
MetricsReport compute_metrics(const ConfusionCounts& counts,
                              const std::vector<std::string>& class_names);

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace dfeia
