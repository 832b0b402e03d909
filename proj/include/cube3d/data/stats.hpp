#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "cube3d/data/manifest.hpp"

namespace cube3d::data {

struct GroupStats {
  std::size_t videos = 0;
  double total_seconds = 0.0;
  double min_seconds = 0.0;
  double max_seconds = 0.0;

  double mean_seconds() const { return videos ? total_seconds / static_cast<double>(videos) : 0.0; }

  void add(double seconds) {
    min_seconds = videos ? std::min(min_seconds, seconds) : seconds;
    max_seconds = videos ? std::max(max_seconds, seconds) : seconds;
    total_seconds += seconds;
    ++videos;
  }
};

struct SplitStats {
  GroupStats anomalous;
  GroupStats normal;

  std::size_t videos() const { return anomalous.videos + normal.videos; }
};

struct DatasetStats {
  std::map<Split, SplitStats> splits{{Split::train, {}}, {Split::test, {}}};
};

// A video counts as anomalous when any of its frames carries a label other
// than Normal. Durations are frame counts over `fps`; `frame_count` defaults
// to reading each entry's header.
inline DatasetStats dataset_stats(const Manifest& m, const std::vector<AnnotationRecord>& annotations,
                                  double fps = kDefaultFps,
                                  std::function<std::size_t(const ManifestEntry&)> frame_count = {}) {
  if (!(fps > 0.0)) fail(ErrorKind::config, "frame rate must be positive");
  if (!frame_count) frame_count = [&m](const ManifestEntry& e) { return entry_frame_count(m, e); };
  DatasetStats s;
  for (const auto& e : m.entries) {
    bool anomalous = false;
    for (const auto& r : annotations_for(annotations, source_id(e))) anomalous = anomalous || r.label != kNormal;
    const double seconds = static_cast<double>(frame_count(e)) / fps;
    auto& split = s.splits[e.split];
    (anomalous ? split.anomalous : split.normal).add(seconds);
  }
  return s;
}

inline std::string format_stats(const DatasetStats& s) {
  std::string out;
  char buf[160];
  for (const auto& [split, st] : s.splits) {
    out += std::string(to_string(split)) + " split\n";
    std::snprintf(buf, sizeof buf, "%-22s %12s %12s\n", "", "Anomalous", "Normal");
    out += buf;
    std::snprintf(buf, sizeof buf, "%-22s %12zu %12zu\n", "Number of videos", st.anomalous.videos, st.normal.videos);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-22s %12.2f %12.2f\n", "Total length (sec)", st.anomalous.total_seconds,
                  st.normal.total_seconds);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-22s %5.2f/%-6.2f %5.2f/%-6.2f\n", "Min/Max length (sec)", st.anomalous.min_seconds,
                  st.anomalous.max_seconds, st.normal.min_seconds, st.normal.max_seconds);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-22s %12.2f %12.2f\n", "Average length (sec)", st.anomalous.mean_seconds(),
                  st.normal.mean_seconds());
    out += buf;
  }
  return out;
}

}  // namespace cube3d::data
