#include "dfeia/metrics.hpp"

#include <numeric>

namespace dfeia {

int64_t ConfusionCounts::total() const {
  return std::accumulate(m.begin(), m.end(), int64_t{0});
}

int64_t ConfusionCounts::fp(int c) const {
  int64_t s = 0;
  for (int r = 0; r < k; ++r) {
    if (r != c) s += at(r, c);
  }
  return s;
}

int64_t ConfusionCounts::fn(int c) const {
  int64_t s = 0;
  for (int p = 0; p < k; ++p) {
    if (p != c) s += at(c, p);
  }
  return s;
}

static double ratio(int64_t num, int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

MetricsReport compute_metrics(const ConfusionCounts& counts,
                              const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != counts.k) {
    throw UsageError("compute_metrics: class name count does not match matrix size");
  }
  MetricsReport rep{0.0, {}, {}, counts};

  int64_t trace = 0;
  for (int c = 0; c < counts.k; ++c) trace += counts.tp(c);
  rep.accuracy = ratio(trace, counts.total());

  for (int c = 0; c < counts.k; ++c) {
    ClassMetrics cm;
    cm.name = class_names[c];
    cm.tp = counts.tp(c);
    cm.fp = counts.fp(c);
    cm.fn = counts.fn(c);
    cm.tn = counts.tn(c);
    cm.precision = ratio(cm.tp, cm.tp + cm.fp);
    cm.recall = ratio(cm.tp, cm.tp + cm.fn);
    cm.specificity = ratio(cm.tn, cm.tn + cm.fp);
    cm.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
    rep.macro.precision += cm.precision;
    rep.macro.recall += cm.recall;
    rep.macro.specificity += cm.specificity;
    rep.macro.f1 += cm.f1;
    rep.per_class.push_back(std::move(cm));
  }
  const double inv_k = 1.0 / static_cast<double>(counts.k);
  rep.macro.precision *= inv_k;
  rep.macro.recall *= inv_k;
  rep.macro.specificity *= inv_k;
  rep.macro.f1 *= inv_k;
  return rep;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& c : report.per_class) {
    per.push_back({{"name", c.name},
                   {"precision", c.precision},
                   {"recall", c.recall},
                   {"specificity", c.specificity},
                   {"f1", c.f1},
                   {"tp", c.tp},
                   {"fp", c.fp},
                   {"fn", c.fn},
                   {"tn", c.tn}});
  }
  j["per_class"] = per;
  j["macro"] = {{"precision", report.macro.precision},
                {"recall", report.macro.recall},
                {"specificity", report.macro.specificity},
                {"f1", report.macro.f1}};
  nlohmann::json mat = nlohmann::json::array();
  for (int r = 0; r < report.confusion.k; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < report.confusion.k; ++c) row.push_back(report.confusion.at(r, c));
    mat.push_back(row);
  }
  j["confusion"] = mat;
  return j;
}

}  // namespace dfeia
