#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cube3d/data/annotations.hpp"
#include "cube3d/data/cubes.hpp"
#include "cube3d/data/frames.hpp"

namespace cube3d::data {

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  fail(ErrorKind::format, "unknown split '" + std::string(s) + "'");
}

// One line "video_id<TAB>path<TAB>split<TAB>origin". Augmented entries share
// the original's path; the flip is applied when the frames are loaded.
struct ManifestEntry {
  std::string video_id;
  std::string path;
  Split split = Split::train;
  Origin origin = Origin::original;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // relative paths resolve against this

  std::vector<ManifestEntry> split(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(e);
    return out;
  }

  std::string resolve(const ManifestEntry& e) const {
    const std::filesystem::path p(e.path);
    return (p.is_absolute() ? p : base_dir / p).string();
  }
};

// Id of the original an entry derives from; annotations are keyed by it.
inline std::string source_id(const ManifestEntry& e) {
  if (e.origin == Origin::original) return e.video_id;
  const std::string suffix = "__" + std::string(to_string(e.origin));
  if (e.video_id.size() <= suffix.size() || e.video_id.compare(e.video_id.size() - suffix.size(), suffix.size(), suffix))
    fail(ErrorKind::validation, "augmented entry " + e.video_id + " does not end in " + suffix);
  return e.video_id.substr(0, e.video_id.size() - suffix.size());
}

inline void validate_manifest(const Manifest& m) {
  std::set<std::string> ids, originals;
  for (const auto& e : m.entries) {
    if (e.video_id.empty()) fail(ErrorKind::validation, "manifest entry with empty video id");
    if (!ids.insert(e.video_id).second) fail(ErrorKind::validation, "duplicate video id " + e.video_id);
    if (e.origin == Origin::original) originals.insert(e.video_id);
  }
  for (const auto& e : m.entries)
    if (e.origin != Origin::original && !originals.count(source_id(e)))
      fail(ErrorKind::validation, e.video_id + " references missing original " + source_id(e));
}

inline Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {}) {
  Manifest m{{}, std::move(base_dir)};
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_line(line, '\t');
    if (f.size() != 4)
      fail(ErrorKind::format, "manifest line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    m.entries.push_back({f[0], f[1], parse_split(f[2]), parse_origin(f[3])});
  }
  validate_manifest(m);
  return m;
}

inline std::string format_manifest(const Manifest& m) {
  std::string out;
  for (const auto& e : m.entries)
    out += e.video_id + "\t" + e.path + "\t" + std::string(to_string(e.split)) + "\t" +
           std::string(to_string(e.origin)) + "\n";
  return out;
}

inline Manifest read_manifest(const std::string& path) {
  return parse_manifest(io::read_file(path), std::filesystem::path(path).parent_path());
}

inline void write_manifest(const std::string& path, const Manifest& m) { io::write_file(path, format_manifest(m)); }

// Adds flipped copies of every original training entry: multiplicity 1
// adds nothing, 2 adds hflip, 3 adds hflip and vflip. Test entries are
// never augmented.
inline Manifest augment_manifest(const Manifest& m, int multiplicity = 3) {
  if (multiplicity < 1 || multiplicity > 3) fail(ErrorKind::config, "augmentation multiplicity must be 1, 2 or 3");
  Manifest out{{}, m.base_dir};
  std::set<std::string> present;
  for (const auto& e : m.entries) present.insert(e.video_id);
  for (const auto& e : m.entries) {
    out.entries.push_back(e);
    if (e.split != Split::train || e.origin != Origin::original) continue;
    for (Origin o : {Origin::hflip, Origin::vflip}) {
      if ((o == Origin::hflip && multiplicity < 2) || (o == Origin::vflip && multiplicity < 3)) continue;
      const std::string id = augmented_id(e.video_id, o);
      if (present.count(id)) continue;
      out.entries.push_back({id, e.path, e.split, o});
    }
  }
  validate_manifest(out);
  return out;
}

// Frames of an entry with its flip applied; optionally resized.
inline FrameSequence load_entry(const Manifest& m, const ManifestEntry& e,
                                const std::optional<PreprocessOptions>& prep = std::nullopt) {
  FrameSequence seq = ingest_frames(m.resolve(e), source_id(e));
  if (prep && (seq.height() != prep->height || seq.width() != prep->width || prep->mean_subtract))
    seq = preprocess(seq, *prep);
  seq = apply_origin(seq, e.origin);
  seq.video_id = e.video_id;
  return seq;
}

inline std::size_t entry_frame_count(const Manifest& m, const ManifestEntry& e) {
  const std::string path = m.resolve(e);
  if (std::filesystem::is_directory(path)) return detail::numbered_frames(path).size();
  return peek_vten_shape(path)[0];
}

// Cubes of every entry of `split`, labelled from the original's annotations.
inline std::vector<Cube> load_split_cubes(const Manifest& m, const std::vector<AnnotationRecord>& annotations, Split split,
                                          const std::optional<PreprocessOptions>& prep = std::nullopt,
                                          std::size_t window = kCubeFrames) {
  std::vector<Cube> out;
  for (const auto& e : m.split(split)) {
    FrameSequence seq = load_entry(m, e, prep);
    auto cubes = assemble_cubes(seq, annotations_for(annotations, source_id(e)), window);
    for (auto& c : cubes) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace cube3d::data
