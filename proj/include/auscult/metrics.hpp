#pragma once

#include <cfenv>

#include <json.hpp>

#include "auscult/dataset.hpp"

namespace auscult {

// Challenge scoring. Sensitivity pools every non-Normal class; specificity is
// accuracy on the Normal class; the ranking Score averages the arithmetic and
// harmonic means of the two. All values are percentages.

struct ConfusionMatrix {
  int classes = 0;
  int normal_index = 0;
  std::vector<int64_t> counts;  // row = truth, col = prediction

  explicit ConfusionMatrix(int n_classes = 0, int normal = 0)
      : classes(n_classes), normal_index(normal),
        counts(size_t(n_classes) * n_classes, 0) {}

  void add(int truth, int predicted, int64_t n = 1) {
    require(truth >= 0 && truth < classes && predicted >= 0 && predicted < classes,
            "ConfusionMatrix: label out of range");
    counts[size_t(truth) * classes + predicted] += n;
  }
  int64_t at(int truth, int predicted) const {
    return counts[size_t(truth) * classes + predicted];
  }
  int64_t row_sum(int truth) const {
    int64_t acc = 0;
    for (int c = 0; c < classes; ++c) acc += at(truth, c);
    return acc;
  }
  int64_t total() const {
    int64_t acc = 0;
    for (int64_t v : counts) acc += v;
    return acc;
  }
};

// SE = sum of correctly classified non-Normal samples / all non-Normal samples
inline double sensitivity(const ConfusionMatrix& cm) {
  int64_t correct = 0, all = 0;
  for (int i = 0; i < cm.classes; ++i) {
    if (i == cm.normal_index) continue;
    correct += cm.at(i, i);
    all += cm.row_sum(i);
  }
  require(all > 0, "sensitivity undefined: no non-Normal samples");
  return 100.0 * double(correct) / double(all);
}

// SP = correctly classified Normal samples / all Normal samples
inline double specificity(const ConfusionMatrix& cm) {
  const int64_t all = cm.row_sum(cm.normal_index);
  require(all > 0, "specificity undefined: no Normal samples");
  return 100.0 * double(cm.at(cm.normal_index, cm.normal_index)) / double(all);
}

struct Scores {
  double avg, harmonic, score;
};

inline Scores scores(double se, double sp) {
  Scores s;
  s.avg = (se + sp) / 2.0;
  s.harmonic = (se + sp) == 0.0 ? 0.0 : 2.0 * se * sp / (se + sp);
  s.score = (s.avg + s.harmonic) / 2.0;
  return s;
}

struct MetricReport {
  double se = 0, sp = 0, as = 0, hs = 0, score = 0;
};

inline MetricReport compute_report(const ConfusionMatrix& cm) {
  MetricReport r;
  r.se = sensitivity(cm);
  r.sp = specificity(cm);
  const Scores s = scores(r.se, r.sp);
  r.as = s.avg;
  r.hs = s.harmonic;
  r.score = s.score;
  return r;
}

// one decimal, ties to even; raw values are reported alongside
inline double round1(double x) {
  const int prev = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(x * 10.0) / 10.0;
  std::fesetround(prev);
  return r;
}

inline nlohmann::json report_json(const ConfusionMatrix& cm, const MetricReport& r,
                                  TaskId task) {
  nlohmann::json j;
  j["task"] = to_string(task);
  j["classes"] = class_names(task);
  j["normal_index"] = cm.normal_index;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < cm.classes; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < cm.classes; ++c) row.push_back(cm.at(i, c));
    rows.push_back(row);
  }
  j["confusion_matrix"] = rows;
  j["raw"] = {{"se", r.se}, {"sp", r.sp}, {"as", r.as}, {"hs", r.hs},
              {"score", r.score}};
  j["rounded"] = {{"se", round1(r.se)},
                  {"sp", round1(r.sp)},
                  {"as", round1(r.as)},
                  {"hs", round1(r.hs)},
                  {"score", round1(r.score)}};
  return j;
}

}  // namespace auscult
