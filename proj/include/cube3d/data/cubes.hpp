#pragma once

#include <array>
#include <span>
#include <vector>

#include "cube3d/data/annotations.hpp"
#include "cube3d/data/frames.hpp"

namespace cube3d::data {

inline constexpr std::size_t kCubeFrames = 16;

// One network sample: `window` consecutive frames with their label.
struct Cube {
  Tensor<float> data;  // window x H x W x 3
  std::size_t label = kNormal;
  std::string video_id;
  std::size_t start_frame = 0;
};

inline std::size_t cube_count(std::size_t frames, std::size_t window = kCubeFrames) {
  if (window == 0) fail(ErrorKind::config, "window must be positive");
  return frames / window;
}

// Majority label of labels[start, start + window). On a tie the label whose
// first frame in the window comes earliest wins, i.e. the earlier-starting
// segment.
inline std::size_t window_label(std::span<const std::size_t> labels, std::size_t start, std::size_t window) {
  std::array<std::size_t, kNumClasses> count{}, first{};
  first.fill(window);
  for (std::size_t i = 0; i < window; ++i) {
    const std::size_t l = labels[start + i];
    if (count[l]++ == 0) first[l] = i;
  }
  std::size_t best = kNormal;
  for (std::size_t l = 0; l < kNumClasses; ++l) {
    if (count[l] == 0) continue;
    if (count[best] == 0 || count[l] > count[best] || (count[l] == count[best] && first[l] < first[best])) best = l;
  }
  return best;
}

inline Tensor<float> window_frames(const FrameSequence& seq, std::size_t start, std::size_t window) {
  const Shape& s = seq.frames.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  Tensor<float> t(Shape{window, s[1], s[2], s[3]});
  std::copy_n(seq.frames.raw() + start * per, window * per, t.raw());
  return t;
}

// Non-overlapping windows [0, w), [w, 2w), ...; a trailing partial window
// is dropped.
inline std::vector<Cube> assemble_cubes(const FrameSequence& seq, const std::vector<AnnotationRecord>& records,
                                        std::size_t window = kCubeFrames) {
  const auto labels = frame_labels(records, seq.frame_count());
  std::vector<Cube> cubes;
  const std::size_t n = cube_count(seq.frame_count(), window);
  cubes.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    cubes.push_back({window_frames(seq, k * window, window), window_label(labels, k * window, window), seq.video_id,
                     k * window});
  return cubes;
}

}  // namespace cube3d::data
