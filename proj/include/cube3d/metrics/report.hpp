#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cube3d/binary_io.hpp"
#include "cube3d/data/classes.hpp"
#include "cube3d/metrics/confusion.hpp"
#include "cube3d/metrics/roc.hpp"

namespace cube3d::metrics {

enum class Unit { cube, video };

inline std::string_view to_string(Unit u) { return u == Unit::cube ? "cube" : "video"; }

struct MetricsReport {
  Unit unit = Unit::cube;
  std::vector<std::string> class_names;
  ConfusionMatrix confusion;
  PrfSummary prf;
  std::vector<RocCurve> roc;
  RocCurve micro;
  std::optional<double> macro_auc;  // empty when no class has both outcomes
  double average_accuracy = 0.0;
  std::size_t samples = 0;
};

inline std::size_t argmax(const std::vector<double>& row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

inline std::vector<std::string> default_class_names(std::size_t num_classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c)
    names.push_back(c < data::kNumClasses ? std::string(data::kClassNames[c]) : "class_" + std::to_string(c));
  return names;
}

// Full report from aligned rows; predictions default to the score argmax.
inline MetricsReport compute_report(const std::vector<std::size_t>& truth, const std::vector<std::vector<double>>& scores,
                                    std::size_t num_classes, std::optional<std::vector<std::size_t>> predicted = std::nullopt,
                                    Unit unit = Unit::cube) {
  if (truth.empty()) fail(ErrorKind::validation, "no samples to evaluate");
  detail::check_score_matrix(scores, truth, num_classes);
  if (!predicted) {
    predicted.emplace();
    for (const auto& row : scores) predicted->push_back(argmax(row));
  }
  MetricsReport r;
  r.unit = unit;
  r.samples = truth.size();
  r.class_names = default_class_names(num_classes);
  r.confusion = confusion_matrix(truth, *predicted, num_classes);
  r.prf = precision_recall_f1(r.confusion);
  r.roc = one_vs_rest(scores, truth, num_classes);
  r.micro = micro_roc(scores, truth, num_classes);
  if (std::any_of(r.roc.begin(), r.roc.end(), [](const RocCurve& c) { return c.defined; })) r.macro_auc = macro_auc(r.roc);
  r.average_accuracy = average_accuracy(r.confusion);
  return r;
}

struct VideoRows {
  std::vector<std::string> video_ids;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  std::vector<std::vector<double>> scores;
};

// Video-level view: per video the majority true label and the majority
// predicted label over its cubes (ties to the lower class index), with the
// mean score row. Videos keep their first-appearance order.
inline VideoRows aggregate_by_video(const std::vector<std::string>& video_ids, const std::vector<std::size_t>& truth,
                                    const std::vector<std::vector<double>>& scores, std::size_t num_classes) {
  detail::check_score_matrix(scores, truth, num_classes);
  if (video_ids.size() != truth.size()) fail(ErrorKind::validation, "video ids do not align with the rows");
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::size_t>> true_votes, pred_votes;
  VideoRows out;
  std::vector<std::size_t> count;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto [it, fresh] = slot.emplace(video_ids[i], out.video_ids.size());
    if (fresh) {
      out.video_ids.push_back(video_ids[i]);
      out.scores.emplace_back(num_classes, 0.0);
      true_votes.emplace_back(num_classes, 0);
      pred_votes.emplace_back(num_classes, 0);
      count.push_back(0);
    }
    const std::size_t v = it->second;
    ++true_votes[v][truth[i]];
    ++pred_votes[v][argmax(scores[i])];
    ++count[v];
    for (std::size_t c = 0; c < num_classes; ++c) out.scores[v][c] += scores[i][c];
  }
  auto vote = [](const std::vector<std::size_t>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  for (std::size_t v = 0; v < out.video_ids.size(); ++v) {
    out.truth.push_back(vote(true_votes[v]));
    out.predicted.push_back(vote(pred_votes[v]));
    for (double& s : out.scores[v]) s /= static_cast<double>(count[v]);
  }
  return out;
}

namespace detail {

inline nlohmann::json number_or_null(double v, bool defined = true) {
  return defined && std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

// Scalars only; undefined values are null.
inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["unit"] = std::string(to_string(r.unit));
  j["samples"] = r.samples;
  j["num_classes"] = r.confusion.num_classes;
  j["average_accuracy"] = r.average_accuracy;
  j["mean_precision"] = r.prf.mean_precision;
  j["mean_recall"] = r.prf.mean_recall;
  j["mean_f1"] = r.prf.mean_f1;
  j["micro_auc"] = detail::number_or_null(r.micro.auc, r.micro.defined);
  j["macro_auc"] = r.macro_auc ? nlohmann::json(*r.macro_auc) : nlohmann::json(nullptr);
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.confusion.num_classes; ++c) {
    const auto& k = r.prf.per_class[c];
    classes.push_back({{"index", c},
                       {"name", r.class_names[c]},
                       {"support", r.confusion.support(c)},
                       {"accuracy", r.confusion.support(c) ? nlohmann::json(r.confusion.normalized()[c][c]) : nlohmann::json(nullptr)},
                       {"precision", k.precision},
                       {"recall", k.recall},
                       {"f1", k.f1},
                       {"precision_defined", k.precision_defined},
                       {"recall_defined", k.recall_defined},
                       {"f1_defined", k.f1_defined},
                       {"auc", detail::number_or_null(r.roc[c].auc, r.roc[c].defined)}});
  }
  j["classes"] = std::move(classes);
  return j;
}

// Raw counts, a blank line, then the row-normalized view with a support
// flag per row.
inline std::string confusion_csv(const MetricsReport& r) {
  const auto& cm = r.confusion;
  std::string header = "true\\pred";
  for (const auto& n : r.class_names) header += "," + n;
  std::string out = "# counts\n" + header + "\n";
  for (std::size_t t = 0; t < cm.num_classes; ++t) {
    out += r.class_names[t];
    for (std::size_t p = 0; p < cm.num_classes; ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  out += "\n# normalized\n" + header + ",has_support\n";
  const auto norm = cm.normalized();
  char buf[32];
  for (std::size_t t = 0; t < cm.num_classes; ++t) {
    out += r.class_names[t];
    for (double v : norm[t]) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      out += buf;
    }
    out += cm.support(t) ? ",1\n" : ",0\n";
  }
  return out;
}

inline std::string roc_csv(const RocCurve& c) {
  std::string out = "fpr,tpr\n";
  char buf[64];
  for (const auto& p : c.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

// metrics.json, confusion.csv and one roc_<class>.csv per class (header only
// for classes whose curve is undefined), plus roc_micro.csv.
inline void write_report(const std::string& dir, const MetricsReport& r) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::write_file((fs::path(dir) / "metrics.json").string(), to_json(r).dump(2) + "\n");
  io::write_file((fs::path(dir) / "confusion.csv").string(), confusion_csv(r));
  for (std::size_t c = 0; c < r.roc.size(); ++c)
    io::write_file((fs::path(dir) / ("roc_" + r.class_names[c] + ".csv")).string(), roc_csv(r.roc[c]));
  io::write_file((fs::path(dir) / "roc_micro.csv").string(), roc_csv(r.micro));
}

}  // namespace cube3d::metrics
