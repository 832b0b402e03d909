#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>

#include "cube3d/data/manifest.hpp"

namespace cube3d::data {

// Desk-scale stand-in dataset: each class is a block moving in its own
// direction (eight compass directions) at its own speed (1 or 2 px/frame)
// over a static noisy background. Start position and block shade vary per
// clip; frames are quantized to multiples of 1/255 like decoded video.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t num_classes = 4;
  std::size_t clips_per_class = 8;
  std::size_t test_clips_per_class = 2;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t frames = 64;

  void validate() const {
    if (num_classes < 2 || num_classes > kNumClasses) fail(ErrorKind::config, "synthetic fixture needs 2..14 classes");
    if (clips_per_class == 0) fail(ErrorKind::config, "clips_per_class must be positive");
    if (height < 8 || width < 8) fail(ErrorKind::config, "synthetic frames must be at least 8x8");
    if (frames == 0) fail(ErrorKind::config, "synthetic clips need at least one frame");
  }
};

struct SynthFixture {
  Manifest manifest;
  std::vector<AnnotationRecord> annotations;
  std::vector<FrameSequence> videos;  // aligned with manifest.entries
};

struct Motion {
  int dy;
  int dx;
};

inline Motion class_motion(std::size_t label) {
  static constexpr int dirs[8][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}, {1, 1}, {1, -1}, {-1, -1}, {-1, 1}};
  const int speed = 1 + static_cast<int>(label / 8);
  return {dirs[label % 8][0] * speed, dirs[label % 8][1] * speed};
}

inline std::string synth_video_id(std::size_t label, Split split, std::size_t clip) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", clip);
  return std::string(class_name(label)) + "_" + std::string(to_string(split)) + "_" + buf;
}

inline FrameSequence synth_video(const SynthConfig& cfg, std::size_t label, Split split, std::size_t clip) {
  const std::uint64_t key = (static_cast<std::uint64_t>(label) << 40) ^ (static_cast<std::uint64_t>(split) << 32) ^ clip;
  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + key);
  std::uniform_int_distribution<std::size_t> py(0, cfg.height - 1), px(0, cfg.width - 1);
  std::uniform_real_distribution<double> shade(0.7, 1.0), noise(0.0, 0.25);

  const std::size_t H = cfg.height, W = cfg.width, B = std::max<std::size_t>(3, std::min(H, W) / 4);
  std::vector<float> background(H * W * 3);
  for (auto& v : background) v = static_cast<float>(noise(rng));
  const double s = shade(rng);
  const std::array<float, 3> colour{static_cast<float>(s), static_cast<float>(s * 0.9), static_cast<float>(s * 0.8)};
  const Motion mv = class_motion(label);
  const long y0 = static_cast<long>(py(rng)), x0 = static_cast<long>(px(rng));

  FrameSequence seq{synth_video_id(label, split, clip), Tensor<float>(Shape{cfg.frames, H, W, 3}), kDefaultFps};
  auto wrap = [](long v, std::size_t n) { return static_cast<std::size_t>(((v % long(n)) + long(n)) % long(n)); };
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    float* f = seq.frames.raw() + t * H * W * 3;
    std::copy(background.begin(), background.end(), f);
    const long cy = y0 + mv.dy * static_cast<long>(t), cx = x0 + mv.dx * static_cast<long>(t);
    for (std::size_t by = 0; by < B; ++by)
      for (std::size_t bx = 0; bx < B; ++bx) {
        const std::size_t y = wrap(cy + static_cast<long>(by), H), x = wrap(cx + static_cast<long>(bx), W);
        for (std::size_t c = 0; c < 3; ++c) f[(y * W + x) * 3 + c] = colour[c];
      }
  }
  for (float& v : seq.frames.data()) v = detail::scale_pixel(detail::quantize_pixel(v));
  return seq;
}

inline SynthFixture synth_fixture(const SynthConfig& cfg) {
  cfg.validate();
  SynthFixture fx;
  for (Split split : {Split::train, Split::test}) {
    const std::size_t clips = split == Split::train ? cfg.clips_per_class : cfg.test_clips_per_class;
    for (std::size_t label = 0; label < cfg.num_classes; ++label)
      for (std::size_t clip = 0; clip < clips; ++clip) {
        FrameSequence v = synth_video(cfg, label, split, clip);
        fx.manifest.entries.push_back({v.video_id, "videos/" + v.video_id + ".vten", split, Origin::original});
        fx.annotations.push_back({v.video_id, 0, cfg.frames - 1, label});
        fx.videos.push_back(std::move(v));
      }
  }
  validate_manifest(fx.manifest);
  return fx;
}

// Writes videos/<id>.vten, annotations.csv and manifest.tsv under `dir`.
inline Manifest write_fixture(const std::string& dir, const SynthFixture& fx) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "videos");
  for (std::size_t i = 0; i < fx.videos.size(); ++i)
    save_frames_vten((fs::path(dir) / fx.manifest.entries[i].path).string(), fx.videos[i]);
  write_annotations((fs::path(dir) / "annotations.csv").string(), fx.annotations);
  write_manifest((fs::path(dir) / "manifest.tsv").string(), fx.manifest);
  Manifest m = fx.manifest;
  m.base_dir = dir;
  return m;
}

}  // namespace cube3d::data
