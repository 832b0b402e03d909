#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cube3d/error.hpp"

namespace cube3d::metrics {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * num_classes + p]; }

  std::uint64_t support(std::size_t t) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < num_classes; ++p) s += at(t, p);
    return s;
  }

  std::uint64_t predicted(std::size_t p) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < num_classes; ++t) s += at(t, p);
    return s;
  }

  // Each row divided by its support; rows without support stay all zero.
  std::vector<std::vector<double>> normalized() const {
    std::vector<std::vector<double>> out(num_classes, std::vector<double>(num_classes, 0.0));
    for (std::size_t t = 0; t < num_classes; ++t) {
      const std::uint64_t s = support(t);
      if (s == 0) continue;
      for (std::size_t p = 0; p < num_classes; ++p) out[t][p] = static_cast<double>(at(t, p)) / static_cast<double>(s);
    }
    return out;
  }

  std::vector<bool> has_support() const {
    std::vector<bool> out(num_classes);
    for (std::size_t t = 0; t < num_classes; ++t) out[t] = support(t) > 0;
    return out;
  }
};

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                        std::size_t num_classes) {
  if (num_classes == 0) fail(ErrorKind::validation, "confusion matrix needs at least one class");
  if (truth.size() != predicted.size())
    fail(ErrorKind::validation, std::to_string(truth.size()) + " true labels vs " + std::to_string(predicted.size()) +
                                    " predictions");
  ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes)
      fail(ErrorKind::validation, "label out of range at sample " + std::to_string(i));
    ++cm.counts[truth[i] * num_classes + predicted[i]];
  }
  return cm;
}

// Unweighted mean of the normalized diagonal. `defined` (when given) marks
// the rows that count; rows without support are skipped.
inline double average_accuracy(const std::vector<std::vector<double>>& normalized, const std::vector<bool>& defined = {}) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < normalized.size(); ++c) {
    if (normalized[c].size() != normalized.size()) fail(ErrorKind::validation, "normalized matrix is not square");
    if (!defined.empty() && !defined[c]) continue;
    sum += normalized[c][c];
    ++n;
  }
  if (n == 0) fail(ErrorKind::validation, "average accuracy needs at least one class with support");
  return sum / static_cast<double>(n);
}

inline double average_accuracy(const ConfusionMatrix& cm) { return average_accuracy(cm.normalized(), cm.has_support()); }

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

struct PrfSummary {
  std::vector<ClassScores> per_class;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
};

inline double harmonic_f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Zero denominators give 0 with the matching flag cleared; the means are
// plain averages over all classes, zeros included.
inline PrfSummary precision_recall_f1(const ConfusionMatrix& cm) {
  PrfSummary s;
  const std::size_t C = cm.num_classes;
  for (std::size_t c = 0; c < C; ++c) {
    ClassScores k;
    const double tp = static_cast<double>(cm.at(c, c));
    const std::uint64_t pred = cm.predicted(c), sup = cm.support(c);
    k.precision_defined = pred > 0;
    k.recall_defined = sup > 0;
    k.precision = pred ? tp / static_cast<double>(pred) : 0.0;
    k.recall = sup ? tp / static_cast<double>(sup) : 0.0;
    k.f1_defined = k.precision_defined && k.recall_defined;
    k.f1 = harmonic_f1(k.precision, k.recall);
    s.mean_precision += k.precision;
    s.mean_recall += k.recall;
    s.mean_f1 += k.f1;
    s.per_class.push_back(k);
  }
  s.mean_precision /= static_cast<double>(C);
  s.mean_recall /= static_cast<double>(C);
  s.mean_f1 /= static_cast<double>(C);
  return s;
}

}  // namespace cube3d::metrics
