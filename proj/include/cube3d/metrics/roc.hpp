#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "cube3d/error.hpp"

namespace cube3d::metrics {

struct RocPoint {
  double fpr;
  double tpr;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1); empty when undefined
  double auc = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Threshold sweep over distinct scores, highest first. Samples sharing a
// score enter together, so a tie block is one diagonal segment, and the
// trapezoid rule over the segments equals P(s+ > s-) + P(s+ = s-) / 2.
// The area is accumulated in integers and divided once.
inline RocCurve roc_curve(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size())
    fail(ErrorKind::validation, std::to_string(scores.size()) + " scores vs " + std::to_string(positive.size()) + " labels");
  for (double s : scores)
    if (std::isnan(s)) fail(ErrorKind::validation, "NaN score");
  RocCurve r;
  for (bool p : positive) (p ? r.positives : r.negatives) += 1;
  if (r.positives == 0 || r.negatives == 0) return r;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double P = static_cast<double>(r.positives), N = static_cast<double>(r.negatives);
  unsigned __int128 twice_area = 0;
  std::uint64_t tp = 0, fp = 0;
  r.points.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < order.size();) {
    std::uint64_t dtp = 0, dfp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (positive[order[i]] ? dtp : dfp) += 1;
    twice_area += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    r.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  r.auc = static_cast<double>(static_cast<long double>(twice_area) /
                              (2.0L * static_cast<long double>(r.positives) * static_cast<long double>(r.negatives)));
  r.defined = true;
  return r;
}

namespace detail {

inline void check_score_matrix(const std::vector<std::vector<double>>& scores, std::span<const std::size_t> truth,
                               std::size_t num_classes) {
  if (scores.size() != truth.size())
    fail(ErrorKind::validation, std::to_string(scores.size()) + " score rows vs " + std::to_string(truth.size()) + " labels");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != num_classes)
      fail(ErrorKind::validation, "score row " + std::to_string(i) + " has " + std::to_string(scores[i].size()) +
                                      " entries, expected " + std::to_string(num_classes));
    if (truth[i] >= num_classes) fail(ErrorKind::validation, "label out of range at sample " + std::to_string(i));
  }
}

}  // namespace detail

// One-vs-rest curve per class: class c's column against (truth == c).
inline std::vector<RocCurve> one_vs_rest(const std::vector<std::vector<double>>& scores, std::span<const std::size_t> truth,
                                         std::size_t num_classes) {
  detail::check_score_matrix(scores, truth, num_classes);
  std::vector<RocCurve> out;
  std::vector<double> col(scores.size());
  std::vector<bool> pos(scores.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      col[i] = scores[i][c];
      pos[i] = truth[i] == c;
    }
    out.push_back(roc_curve(col, pos));
  }
  return out;
}

// All (score, is-positive) pairs of every one-vs-rest problem pooled.
inline RocCurve micro_roc(const std::vector<std::vector<double>>& scores, std::span<const std::size_t> truth,
                          std::size_t num_classes) {
  detail::check_score_matrix(scores, truth, num_classes);
  std::vector<double> all;
  std::vector<bool> pos;
  all.reserve(scores.size() * num_classes);
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t c = 0; c < num_classes; ++c) {
      all.push_back(scores[i][c]);
      pos.push_back(truth[i] == c);
    }
  return roc_curve(all, pos);
}

// Unweighted mean of the defined per-class AUCs.
inline double macro_auc(const std::vector<RocCurve>& curves) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : curves)
    if (c.defined) sum += c.auc, ++n;
  if (n == 0) fail(ErrorKind::validation, "macro AUC undefined: no class has both positive and negative samples");
  return sum / static_cast<double>(n);
}

struct AucSummary {
  double micro;
  double macro;
};

inline AucSummary micro_macro_auc(const std::vector<std::vector<double>>& scores, std::span<const std::size_t> truth,
                                  std::size_t num_classes) {
  const double macro = macro_auc(one_vs_rest(scores, truth, num_classes));
  const RocCurve micro = micro_roc(scores, truth, num_classes);
  return {micro.auc, macro};
}

}  // namespace cube3d::metrics
