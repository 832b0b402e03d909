#pragma once

// Raw tensor container: "VTN1", u8 rank, rank x u32 LE extents, then the
// element payload as f32 LE in row-major order.

#include <string>

#include "cube3d/binary_io.hpp"
#include "cube3d/tensor.hpp"

namespace cube3d {

inline constexpr std::string_view kVtenMagic = "VTN1";

inline std::string encode_vten(const Tensor<float>& t) {
  io::ByteWriter w;
  w.bytes(kVtenMagic);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.data()) w.f32(v);
  return w.buffer();
}

inline Shape read_vten_shape(io::ByteReader& r) {
  if (r.bytes(4, "magic") != kVtenMagic) fail(ErrorKind::format, "bad magic (expected VTN1)");
  const std::uint8_t rank = r.u8("rank");
  if (rank == 0 || rank > kMaxRank) fail(ErrorKind::format, "rank " + std::to_string(rank) + " unsupported");
  std::vector<std::size_t> dims(rank);
  for (std::size_t a = 0; a < rank; ++a) dims[a] = r.u32("extent " + std::to_string(a));
  try {
    return Shape(std::move(dims));
  } catch (const Error& e) {
    fail(ErrorKind::format, e.what());
  }
}

inline Tensor<float> decode_vten(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  Shape shape = read_vten_shape(r);
  Tensor<float> t(shape);
  r.f32_array(t.raw(), t.size(), "payload");
  if (!r.at_end()) fail(ErrorKind::format, "trailing bytes after payload");
  return t;
}

inline void save_vten(const std::string& path, const Tensor<float>& t) { io::write_file(path, encode_vten(t)); }

inline Tensor<float> load_vten(const std::string& path) { return decode_vten(io::read_file(path)); }

// Reads only the header; cheap way to learn a container's frame count.
inline Shape peek_vten_shape(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::string head(4 + 1 + 4 * kMaxRank, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  io::ByteReader r(std::move(head));
  return read_vten_shape(r);
}

}  // namespace cube3d
