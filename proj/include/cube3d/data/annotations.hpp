#pragma once

#include <algorithm>
#include <charconv>
#include <sstream>
#include <string>
#include <vector>

#include "cube3d/binary_io.hpp"
#include "cube3d/data/classes.hpp"

namespace cube3d::data {

// Inclusive, 0-based frame range carrying one class label.
struct AnnotationRecord {
  std::string video_id;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  std::size_t label = kNormal;

  std::size_t length() const { return end_frame - start_frame + 1; }
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline constexpr std::string_view kAnnotationHeader = "video_id,start_frame,end_frame,label";

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::size_t parse_index(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty())
    fail(ErrorKind::format, where + ": '" + s + "' is not a frame index");
  return v;
}

}  // namespace detail

inline std::vector<AnnotationRecord> parse_annotations(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kAnnotationHeader)
    fail(ErrorKind::format, "annotation header must be '" + std::string(kAnnotationHeader) + "'");
  std::vector<AnnotationRecord> out;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "annotation line " + std::to_string(lineno);
    auto f = detail::split_line(line, ',');
    if (f.size() != 4) fail(ErrorKind::format, where + ": expected 4 fields, got " + std::to_string(f.size()));
    for (auto& s : f) s = detail::trim(s);
    if (f[0].empty()) fail(ErrorKind::format, where + ": empty video id");
    AnnotationRecord r{f[0], detail::parse_index(f[1], where), detail::parse_index(f[2], where), 0};
    try {
      r.label = class_index(f[3]);
    } catch (const Error& e) {
      fail(ErrorKind::validation, where + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_annotations(const std::vector<AnnotationRecord>& records) {
  std::string out = std::string(kAnnotationHeader) + "\n";
  for (const auto& r : records)
    out += r.video_id + "," + std::to_string(r.start_frame) + "," + std::to_string(r.end_frame) + "," +
           std::string(class_name(r.label)) + "\n";
  return out;
}

inline std::vector<AnnotationRecord> read_annotations(const std::string& path) {
  return parse_annotations(io::read_file(path));
}

inline void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  io::write_file(path, format_annotations(records));
}

// Records of one video sorted by start frame.
inline std::vector<AnnotationRecord> annotations_for(const std::vector<AnnotationRecord>& all, const std::string& id) {
  std::vector<AnnotationRecord> out;
  for (const auto& r : all)
    if (r.video_id == id) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start_frame < b.start_frame; });
  return out;
}

// Rejects inverted ranges, ranges past the last frame and overlaps.
inline void validate_annotations(const std::vector<AnnotationRecord>& records, std::size_t frame_count) {
  std::vector<const AnnotationRecord*> sorted;
  for (const auto& r : records) {
    const std::string where = r.video_id + " [" + std::to_string(r.start_frame) + ", " + std::to_string(r.end_frame) + "]";
    if (r.start_frame > r.end_frame) fail(ErrorKind::validation, where + ": start after end");
    if (r.end_frame >= frame_count)
      fail(ErrorKind::validation, where + ": beyond the video's " + std::to_string(frame_count) + " frames");
    if (r.label >= kNumClasses) fail(ErrorKind::validation, where + ": label index out of range");
    sorted.push_back(&r);
  }
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return a->video_id != b->video_id ? a->video_id < b->video_id : a->start_frame < b->start_frame;
  });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->video_id == sorted[i - 1]->video_id && sorted[i]->start_frame <= sorted[i - 1]->end_frame)
      fail(ErrorKind::validation, sorted[i]->video_id + ": ranges starting at " +
                                      std::to_string(sorted[i - 1]->start_frame) + " and " +
                                      std::to_string(sorted[i]->start_frame) + " overlap");
}

// Per-frame labels; frames no record covers are Normal.
inline std::vector<std::size_t> frame_labels(const std::vector<AnnotationRecord>& records, std::size_t frame_count) {
  validate_annotations(records, frame_count);
  std::vector<std::size_t> labels(frame_count, kNormal);
  for (const auto& r : records)
    for (std::size_t f = r.start_frame; f <= r.end_frame; ++f) labels[f] = r.label;
  return labels;
}

}  // namespace cube3d::data
