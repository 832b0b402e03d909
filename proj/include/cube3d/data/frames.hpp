#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cube3d/binary_io.hpp"
#include "cube3d/tensor.hpp"
#include "cube3d/vten.hpp"

namespace cube3d::data {

inline constexpr double kDefaultFps = 30.0;

// A video as one T x H x W x 3 tensor of values in [0, 1].
struct FrameSequence {
  std::string video_id;
  Tensor<float> frames;
  double fps = kDefaultFps;

  std::size_t frame_count() const { return frames.empty() ? 0 : frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
  double seconds() const { return static_cast<double>(frame_count()) / fps; }
};

namespace detail {

// Skips whitespace and '#' comments between PPM header tokens.
inline std::size_t ppm_token(const std::string& s, std::size_t& pos, std::string_view field) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t value = 0;
  auto [end, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value);
  if (ec != std::errc{} || end == s.data() + pos) fail(ErrorKind::format, "PPM header: bad " + std::string(field));
  pos = static_cast<std::size_t>(end - s.data());
  return value;
}

inline float scale_pixel(unsigned char p) { return static_cast<float>(p) / 255.0f; }

inline unsigned char quantize_pixel(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

// Binary PPM (P6, maxval 255) to an H x W x 3 tensor with p -> p / 255.
inline Tensor<float> decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') fail(ErrorKind::format, "PPM header: magic is not P6");
  std::size_t pos = 2;
  const std::size_t w = detail::ppm_token(bytes, pos, "width");
  const std::size_t h = detail::ppm_token(bytes, pos, "height");
  const std::size_t maxval = detail::ppm_token(bytes, pos, "maxval");
  if (w == 0 || h == 0) fail(ErrorKind::format, "PPM header: zero dimension");
  if (maxval != 255) fail(ErrorKind::format, "PPM header: maxval " + std::to_string(maxval) + " (only 255 supported)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail(ErrorKind::format, "PPM header: missing separator before raster");
  ++pos;
  const std::size_t n = h * w * 3;
  if (bytes.size() - pos != n)
    fail(ErrorKind::format, "PPM raster holds " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                                std::to_string(n));
  Tensor<float> img(Shape{h, w, 3});
  for (std::size_t i = 0; i < n; ++i) img[i] = detail::scale_pixel(static_cast<unsigned char>(bytes[pos + i]));
  return img;
}

inline std::string encode_ppm(const Tensor<float>& img) {
  if (img.rank() != 3 || img.dim(2) != 3) fail(ErrorKind::shape, "PPM frames are H x W x 3, got " + img.shape().to_string());
  std::string out = "P6\n" + std::to_string(img.dim(1)) + " " + std::to_string(img.dim(0)) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (float v : img.data()) out.push_back(static_cast<char>(detail::quantize_pixel(v)));
  return out;
}

inline Tensor<float> read_ppm(const std::string& path) { return decode_ppm(io::read_file(path)); }
inline void write_ppm(const std::string& path, const Tensor<float>& img) { io::write_file(path, encode_ppm(img)); }

inline std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.ppm", index);
  return buf;
}

namespace detail {

// frame_%06d.ppm files of a directory keyed by their number.
inline std::map<std::size_t, std::filesystem::path> numbered_frames(const std::filesystem::path& dir) {
  std::map<std::size_t, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != 16 || name.rfind("frame_", 0) != 0 || name.substr(12) != ".ppm") continue;
    std::size_t idx = 0;
    auto [end, ec] = std::from_chars(name.data() + 6, name.data() + 12, idx);
    if (ec != std::errc{} || end != name.data() + 12) continue;
    out.emplace(idx, entry.path());
  }
  return out;
}

}  // namespace detail

inline Tensor<float> stack_frames(const std::vector<Tensor<float>>& frames) {
  if (frames.empty()) fail(ErrorKind::shape, "a sequence needs at least one frame");
  const Shape& f = frames.front().shape();
  Tensor<float> out(Shape{frames.size(), f[0], f[1], f[2]});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!(frames[i].shape() == f))
      fail(ErrorKind::shape, "frame " + std::to_string(i) + " is " + frames[i].shape().to_string() + ", frame 0 is " +
                                 f.to_string());
    std::copy(frames[i].data().begin(), frames[i].data().end(), out.raw() + i * f.numel());
  }
  return out;
}

inline Tensor<float> frame_at(const FrameSequence& seq, std::size_t i) {
  const std::size_t per = seq.frames.size() / seq.frame_count();
  Tensor<float> f(Shape{seq.height(), seq.width(), seq.frames.dim(3)});
  std::copy_n(seq.frames.raw() + i * per, per, f.raw());
  return f;
}

// Loads a directory of numbered P6 frames or a rank-4 ".vten" container.
// The video id defaults to the directory or file stem.
inline FrameSequence ingest_frames(const std::string& path, std::string video_id = {}) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (video_id.empty()) video_id = p.filename().empty() ? p.parent_path().stem().string() : p.stem().string();
  FrameSequence seq{std::move(video_id), {}, kDefaultFps};
  if (fs::is_directory(p)) {
    const auto files = detail::numbered_frames(p);
    if (files.empty()) fail(ErrorKind::missing_frame, "no frame_%06d.ppm files in " + path);
    std::vector<Tensor<float>> frames;
    std::size_t expect = files.begin()->first;
    if (expect > 1) fail(ErrorKind::missing_frame, "numbering starts at " + std::to_string(expect) + " in " + path);
    for (const auto& [idx, file] : files) {
      if (idx != expect) fail(ErrorKind::missing_frame, "frame " + std::to_string(expect) + " missing in " + path);
      frames.push_back(read_ppm(file.string()));
      ++expect;
    }
    seq.frames = stack_frames(frames);
    return seq;
  }
  if (!fs::exists(p)) fail(ErrorKind::io, "no such frame source " + path);
  seq.frames = load_vten(path);
  if (seq.frames.rank() != 4 || seq.frames.dim(3) != 3)
    fail(ErrorKind::shape, path + " holds " + seq.frames.shape().to_string() + ", expected T x H x W x 3");
  for (float v : seq.frames.data())
    if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorKind::format, path + " holds values outside [0, 1]");
  return seq;
}

inline void save_frames_vten(const std::string& path, const FrameSequence& seq) { save_vten(path, seq.frames); }

inline void save_frames_ppm(const std::string& dir, const FrameSequence& seq) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < seq.frame_count(); ++i)
    write_ppm((std::filesystem::path(dir) / frame_file_name(i)).string(), frame_at(seq, i));
}

// Bilinear resize of an H x W x C image with half-pixel centers:
// src = (dst + 0.5) * in / out - 0.5, clamped to the source grid.
inline Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t out_h, std::size_t out_w) {
  if (img.rank() != 3) fail(ErrorKind::shape, "resize expects H x W x C, got " + img.shape().to_string());
  const std::size_t in_h = img.dim(0), in_w = img.dim(1), c = img.dim(2);
  if (in_h < 2 || in_w < 2) fail(ErrorKind::shape, "resize source must be at least 2x2, got " + img.shape().to_string());
  if (out_h == 0 || out_w == 0) fail(ErrorKind::shape, "resize target must be non-empty");
  if (in_h == out_h && in_w == out_w) return img;

  struct Tap {
    std::size_t i0, i1;
    float f;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      const double s = std::clamp((static_cast<double>(o) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(s);
      t[o] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(s - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h), tx = taps(in_w, out_w);
  Tensor<float> out(Shape{out_h, out_w, c});
  const float* src = img.raw();
  for (std::size_t y = 0; y < out_h; ++y) {
    const float* r0 = src + ty[y].i0 * in_w * c;
    const float* r1 = src + ty[y].i1 * in_w * c;
    const float fy = ty[y].f;
    for (std::size_t x = 0; x < out_w; ++x) {
      const float fx = tx[x].f;
      for (std::size_t k = 0; k < c; ++k) {
        const float top = r0[tx[x].i0 * c + k] + fx * (r0[tx[x].i1 * c + k] - r0[tx[x].i0 * c + k]);
        const float bot = r1[tx[x].i0 * c + k] + fx * (r1[tx[x].i1 * c + k] - r1[tx[x].i0 * c + k]);
        out[(y * out_w + x) * c + k] = top + fy * (bot - top);
      }
    }
  }
  return out;
}

struct PreprocessOptions {
  std::size_t height = 170;
  std::size_t width = 170;
  bool mean_subtract = false;  // per-channel mean over the whole sequence
};

inline FrameSequence preprocess(const FrameSequence& seq, const PreprocessOptions& opt = {}) {
  std::vector<Tensor<float>> frames;
  frames.reserve(seq.frame_count());
  for (std::size_t i = 0; i < seq.frame_count(); ++i)
    frames.push_back(resize_bilinear(frame_at(seq, i), opt.height, opt.width));
  FrameSequence out{seq.video_id, stack_frames(frames), seq.fps};
  if (opt.mean_subtract) {
    const std::size_t c = out.frames.dim(3), m = out.frames.size() / c;
    std::vector<double> mean(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < c; ++k) mean[k] += out.frames[i * c + k];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < c; ++k) out.frames[i * c + k] -= static_cast<float>(mean[k] / static_cast<double>(m));
  }
  return out;
}

enum class Origin { original, hflip, vflip };

inline std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::original: return "original";
    case Origin::hflip: return "hflip";
    case Origin::vflip: return "vflip";
  }
  return "original";
}

inline Origin parse_origin(std::string_view s) {
  if (s == "original") return Origin::original;
  if (s == "hflip") return Origin::hflip;
  if (s == "vflip") return Origin::vflip;
  fail(ErrorKind::format, "unknown origin '" + std::string(s) + "'");
}

// Id of an augmented copy: "<id>__hflip" / "<id>__vflip".
inline std::string augmented_id(const std::string& id, Origin o) {
  return o == Origin::original ? id : id + "__" + std::string(to_string(o));
}

// hflip mirrors the width axis, vflip the height axis; time is untouched.
inline FrameSequence apply_origin(const FrameSequence& seq, Origin o) {
  if (o == Origin::original) return seq;
  return {augmented_id(seq.video_id, o), flip(seq.frames, o == Origin::hflip ? 2 : 1), seq.fps};
}

inline std::array<FrameSequence, 3> augment_flips(const FrameSequence& seq) {
  return {seq, apply_origin(seq, Origin::hflip), apply_origin(seq, Origin::vflip)};
}

}  // namespace cube3d::data
