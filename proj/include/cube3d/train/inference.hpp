#pragma once

#include <charconv>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cube3d/data/manifest.hpp"
#include "cube3d/model/net.hpp"
#include "cube3d/nn/activation.hpp"

namespace cube3d::train {

struct PredictionRecord {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // inclusive
  std::vector<double> probs;
  std::size_t label = 0;
  double prob = 0.0;
};

struct PredictionTrace {
  std::string video_id;
  std::vector<PredictionRecord> records;
};

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Softmax of eval-mode logits per window, computed in double.
inline std::vector<std::vector<double>> window_probabilities(const model::AnomalyNet<float>& net, const Tensor<float>& batch) {
  const Tensor<float> logits = net.infer(batch);
  Tensor<double> z(logits.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = logits[i];
  const Tensor<double> p = nn::softmax(z);
  const std::size_t n = p.dim(0), c = p.dim(1);
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(p.raw() + i * c, p.raw() + (i + 1) * c);
  return out;
}

// Non-overlapping windows of the network's clip length, classified in eval
// mode a few windows at a time.
inline PredictionTrace predict_video(const model::AnomalyNet<float>& net, const data::FrameSequence& seq,
                                     std::size_t windows_per_batch = 4) {
  const std::size_t window = net.sample_shape()[0];
  if (seq.frame_count() < window)
    fail(ErrorKind::too_short, seq.video_id + " has " + std::to_string(seq.frame_count()) + " frames, a window needs " +
                                   std::to_string(window));
  const std::size_t n = data::cube_count(seq.frame_count(), window);
  const Shape& fs = seq.frames.shape();
  const std::size_t per = window * fs[1] * fs[2] * fs[3];
  PredictionTrace trace{seq.video_id, {}};
  windows_per_batch = std::max<std::size_t>(1, windows_per_batch);
  for (std::size_t b = 0; b < n; b += windows_per_batch) {
    const std::size_t e = std::min(n, b + windows_per_batch);
    Tensor<float> x(Shape{e - b, window, fs[1], fs[2], fs[3]});
    std::copy_n(seq.frames.raw() + b * per, (e - b) * per, x.raw());
    auto probs = window_probabilities(net, x);
    for (std::size_t k = b; k < e; ++k) {
      PredictionRecord r{k * window, k * window + window - 1, std::move(probs[k - b]), 0, 0.0};
      r.label = argmax(r.probs);
      r.prob = r.probs[r.label];
      trace.records.push_back(std::move(r));
    }
  }
  return trace;
}

// Every frame inherits its window's predicted label; frames past the last
// whole window have none.
inline std::vector<std::optional<std::size_t>> frame_predictions(const PredictionTrace& trace, std::size_t frame_count) {
  std::vector<std::optional<std::size_t>> out(frame_count);
  for (const auto& r : trace.records)
    for (std::size_t f = r.start_frame; f <= r.end_frame && f < frame_count; ++f) out[f] = r.label;
  return out;
}

inline std::string trace_header(std::size_t num_classes) {
  std::string h = "video_id,start_frame,end_frame,pred_label,pred_prob";
  for (std::size_t c = 0; c < num_classes; ++c) h += ",p_" + std::to_string(c);
  return h;
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) fail(ErrorKind::format, where + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

// Shortest round-trip decimal for every probability.
inline std::string format_traces(const std::vector<PredictionTrace>& traces) {
  std::size_t c = 0;
  for (const auto& t : traces)
    if (!t.records.empty()) c = t.records.front().probs.size();
  std::string out = trace_header(c) + "\n";
  for (const auto& t : traces)
    for (const auto& r : t.records) {
      out += t.video_id + "," + std::to_string(r.start_frame) + "," + std::to_string(r.end_frame) + "," +
             std::to_string(r.label) + ",";
      detail::append_double(out, r.prob);
      for (double p : r.probs) {
        out += ",";
        detail::append_double(out, p);
      }
      out += "\n";
    }
  return out;
}

inline std::vector<PredictionTrace> parse_traces(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::format, "empty prediction trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = data::detail::split_line(line, ',');
  if (head.size() < 7 || line.rfind("video_id,start_frame,end_frame,pred_label,pred_prob,", 0) != 0)
    fail(ErrorKind::format, "prediction trace header must start with video_id,start_frame,end_frame,pred_label,pred_prob");
  const std::size_t c = head.size() - 5;
  if (line != trace_header(c)) fail(ErrorKind::format, "prediction trace header columns must be p_0..p_" + std::to_string(c - 1));

  std::vector<PredictionTrace> out;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "trace line " + std::to_string(lineno);
    const auto f = data::detail::split_line(line, ',');
    if (f.size() != c + 5) fail(ErrorKind::format, where + ": expected " + std::to_string(c + 5) + " fields");
    PredictionRecord r;
    r.start_frame = data::detail::parse_index(f[1], where);
    r.end_frame = data::detail::parse_index(f[2], where);
    r.label = data::detail::parse_index(f[3], where);
    r.prob = detail::parse_double(f[4], where);
    for (std::size_t k = 0; k < c; ++k) r.probs.push_back(detail::parse_double(f[5 + k], where));
    if (r.label >= c) fail(ErrorKind::format, where + ": predicted label out of range");
    if (out.empty() || out.back().video_id != f[0]) out.push_back({f[0], {}});
    out.back().records.push_back(std::move(r));
  }
  return out;
}

// Aligned per-cube rows for the metrics: true label, score row, origin.
struct EvaluationRows {
  std::vector<std::string> video_ids;
  std::vector<std::size_t> start_frames;
  std::vector<std::size_t> truth;
  std::vector<std::vector<double>> scores;
};

inline void append_rows(EvaluationRows& rows, const PredictionTrace& trace, const std::vector<std::size_t>& frame_labels) {
  for (const auto& r : trace.records) {
    if (r.end_frame >= frame_labels.size())
      fail(ErrorKind::validation, trace.video_id + ": record past the annotated frame range");
    rows.video_ids.push_back(trace.video_id);
    rows.start_frames.push_back(r.start_frame);
    rows.truth.push_back(data::window_label(frame_labels, r.start_frame, r.end_frame - r.start_frame + 1));
    rows.scores.push_back(r.probs);
  }
}

// Predictions over the unaugmented test split with window-majority truth.
// Every test video must carry at least one annotation record.
inline EvaluationRows evaluate_split(const model::AnomalyNet<float>& net, const data::Manifest& m,
                                     const std::vector<data::AnnotationRecord>& annotations,
                                     const std::optional<data::PreprocessOptions>& prep = std::nullopt) {
  EvaluationRows rows;
  for (const auto& e : m.split(data::Split::test)) {
    if (e.origin != data::Origin::original) continue;
    const auto recs = data::annotations_for(annotations, e.video_id);
    if (recs.empty()) fail(ErrorKind::validation, "test video " + e.video_id + " has no annotations");
    const data::FrameSequence seq = data::load_entry(m, e, prep);
    append_rows(rows, predict_video(net, seq), data::frame_labels(recs, seq.frame_count()));
  }
  return rows;
}

// Rows from a saved trace: truth comes from the annotations, with frames
// beyond the last annotation counted as Normal.
inline EvaluationRows rows_from_traces(const std::vector<PredictionTrace>& traces,
                                       const std::vector<data::AnnotationRecord>& annotations) {
  EvaluationRows rows;
  for (const auto& t : traces) {
    const auto recs = data::annotations_for(annotations, t.video_id);
    if (recs.empty()) fail(ErrorKind::validation, "video " + t.video_id + " has no annotations");
    std::size_t frames = 0;
    for (const auto& r : recs) frames = std::max(frames, r.end_frame + 1);
    for (const auto& r : t.records) frames = std::max(frames, r.end_frame + 1);
    append_rows(rows, t, data::frame_labels(recs, frames));
  }
  return rows;
}

}  // namespace cube3d::train
