#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "cube3d/error.hpp"

namespace cube3d::io {

// Little-endian byte sink. Values are serialized byte by byte so the output
// does not depend on host endianness.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }

  const std::string& buffer() const noexcept { return buf_; }

 private:
  std::string buf_;
};

// Little-endian cursor over an in-memory file image. Every read names the
// field it is decoding so truncation errors point at the offending field.
class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

  std::uint8_t u8(std::string_view field) {
    need(1, field);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16(std::string_view field) {
    need(2, field);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_++]) << (8 * i));
    return v;
  }
  std::uint32_t u32(std::string_view field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  float f32(std::string_view field) { return std::bit_cast<float>(u32(field)); }
  std::string bytes(std::size_t n, std::string_view field) {
    need(n, field);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  // Bulk f32 payload decode.
  void f32_array(float* out, std::size_t count, std::string_view field) {
    if (count > remaining() / 4) fail(ErrorKind::format, "truncated " + std::string(field));
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b)
        v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + 4 * i + b])) << (8 * b);
      out[i] = std::bit_cast<float>(v);
    }
    pos_ += 4 * count;
  }

 private:
  void need(std::size_t n, std::string_view field) const {
    if (remaining() < n) fail(ErrorKind::format, "truncated " + std::string(field));
  }

  std::string data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorKind::io, "short write to " + path);
}

}  // namespace cube3d::io
