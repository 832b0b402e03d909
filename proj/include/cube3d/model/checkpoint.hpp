#pragma once

// Checkpoint container ".vckpt":
//   "VCK1" | version u32 | entry count u32 | entries...
//   entry: name length u16 | UTF-8 name | rank u8 | rank x u32 extents | f32 payload
// All integers and floats little-endian. Names under "meta/" carry metadata.

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cube3d/binary_io.hpp"
#include "cube3d/model/net.hpp"

namespace cube3d::model {

inline constexpr std::string_view kCheckpointMagic = "VCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  std::uint32_t epoch = 0;
  double learning_rate = 0.0;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<NamedTensor<float>> entries;

  const Tensor<float>* get(std::string_view name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e.value;
    return nullptr;
  }
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(ck.version);
  w.u32(static_cast<std::uint32_t>(ck.entries.size()));
  for (const auto& e : ck.entries) {
    if (e.name.size() > 0xFFFF) fail(ErrorKind::format, "entry name too long: " + e.name.substr(0, 32));
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name);
    w.u8(static_cast<std::uint8_t>(e.value.rank()));
    for (std::size_t d : e.value.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.value.data()) w.f32(v);
  }
  return w.buffer();
}

// Parses the whole image before returning; any defect throws and nothing
// partial escapes.
inline Checkpoint decode_checkpoint(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  if (r.bytes(4, "magic") != kCheckpointMagic) fail(ErrorKind::format, "bad magic (expected VCK1)");
  Checkpoint ck;
  ck.version = r.u32("version");
  if (ck.version != kCheckpointVersion)
    fail(ErrorKind::format, "unsupported version " + std::to_string(ck.version));
  const std::uint32_t count = r.u32("entry count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "entry " + std::to_string(i);
    const std::uint16_t len = r.u16(where + " name length");
    std::string name = r.bytes(len, where + " name");
    if (!seen.insert(name).second) fail(ErrorKind::format, "duplicate entry " + name);
    const std::uint8_t rank = r.u8(name + " rank");
    if (rank == 0 || rank > kMaxRank) fail(ErrorKind::format, name + " has unsupported rank " + std::to_string(rank));
    std::vector<std::size_t> dims(rank);
    for (std::size_t a = 0; a < rank; ++a) dims[a] = r.u32(name + " extent " + std::to_string(a));
    Shape shape;
    try {
      shape = Shape(std::move(dims));
    } catch (const Error& e) {
      fail(ErrorKind::format, name + ": " + e.what());
    }
    Tensor<float> t(shape);
    r.f32_array(t.raw(), t.size(), name + " payload");
    ck.entries.push_back({std::move(name), std::move(t)});
  }
  if (!r.at_end()) fail(ErrorKind::format, "trailing bytes after " + std::to_string(count) + " entries");
  return ck;
}

namespace detail {

inline Tensor<float> scalar_entry(double v) { return Tensor<float>(Shape{1}, static_cast<float>(v)); }

inline Tensor<float> encode_config(const ModelConfig& c) {
  std::vector<float> v;
  for (std::size_t x : c.input) v.push_back(static_cast<float>(x));
  v.push_back(static_cast<float>(c.num_classes));
  for (std::size_t x : c.conv_channels) v.push_back(static_cast<float>(x));
  v.push_back(static_cast<float>(c.fc_width));
  v.push_back(static_cast<float>(std::round(c.dropout_rate * 1e6)));  // parts per million, exact in f32
  const Shape shape{v.size()};
  return Tensor<float>::from(shape, std::move(v));
}

inline ModelConfig decode_config(const Tensor<float>& t) {
  if (t.size() != 15) fail(ErrorKind::format, "meta/config has " + std::to_string(t.size()) + " values, expected 15");
  ModelConfig c;
  std::size_t i = 0;
  auto next = [&] {
    const float v = t[i++];
    if (!(v >= 0.0f) || v != std::floor(v)) fail(ErrorKind::format, "meta/config value " + std::to_string(i - 1));
    return static_cast<std::size_t>(v);
  };
  for (auto& x : c.input) x = next();
  c.num_classes = next();
  for (auto& x : c.conv_channels) x = next();
  c.fc_width = next();
  c.dropout_rate = static_cast<double>(next()) / 1e6;
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::format, std::string("meta/config: ") + e.what());
  }
  return c;
}

}  // namespace detail

template <Real T>
Checkpoint make_checkpoint(const AnomalyNet<T>& net, const std::optional<ModelConfig>& config,
                           const TrainingMeta& meta = {}) {
  Checkpoint ck;
  for (const auto& p : net.parameters()) ck.entries.push_back({p.name, p.value->template cast<float>()});
  if (config) ck.entries.push_back({"meta/config", detail::encode_config(*config)});
  ck.entries.push_back({"meta/epoch", detail::scalar_entry(meta.epoch)});
  ck.entries.push_back({"meta/learning_rate", detail::scalar_entry(meta.learning_rate)});
  return ck;
}

template <Real T>
void save_checkpoint(const AnomalyNet<T>& net, const std::string& path, const std::optional<ModelConfig>& config,
                     const TrainingMeta& meta = {}) {
  io::write_file(path, encode_checkpoint(make_checkpoint(net, config, meta)));
}

inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

// Strict load: every parameter of `net` must appear with its exact shape.
template <Real T>
void assign_parameters(AnomalyNet<T>& net, const Checkpoint& ck) {
  std::vector<std::pair<Tensor<T>*, const Tensor<float>*>> plan;
  for (auto& p : net.parameters()) {
    const Tensor<float>* src = ck.get(p.name);
    if (!src) fail(ErrorKind::format, "checkpoint lacks parameter " + p.name);
    if (!(src->shape() == p.value->shape()))
      fail(ErrorKind::conflict, p.name + " is " + src->shape().to_string() + " in the checkpoint but " +
                                    p.value->shape().to_string() + " in the network");
    plan.emplace_back(p.value, src);
  }
  for (auto& [dst, src] : plan) *dst = src->template cast<T>();
}

template <Real T>
struct LoadedModel {
  ModelConfig config;
  AnomalyNet<T> net;
  TrainingMeta meta;
};

inline TrainingMeta read_meta(const Checkpoint& ck) {
  TrainingMeta meta;
  if (const auto* e = ck.get("meta/epoch"); e && e->size() == 1) meta.epoch = static_cast<std::uint32_t>((*e)[0]);
  if (const auto* l = ck.get("meta/learning_rate"); l && l->size() == 1) meta.learning_rate = (*l)[0];
  return meta;
}

template <Real T = float>
LoadedModel<T> load_checkpoint(const Checkpoint& ck) {
  const Tensor<float>* cfg = ck.get("meta/config");
  if (!cfg) fail(ErrorKind::format, "checkpoint lacks meta/config; cannot rebuild the architecture");
  LoadedModel<T> out{detail::decode_config(*cfg), {}, read_meta(ck)};
  out.net = build_model<T>(out.config);
  assign_parameters(out.net, ck);
  return out;
}

template <Real T = float>
LoadedModel<T> load_checkpoint(const std::string& path) {
  return load_checkpoint<T>(read_checkpoint(path));
}

struct LoadReport {
  std::vector<std::string> matched;
  std::vector<std::string> initialized;  // target layers absent from the checkpoint
  std::vector<std::string> unused;       // checkpoint entries the target does not have

  std::string to_string() const {
    std::string s;
    for (const auto& n : matched) s += n + ": loaded\n";
    for (const auto& n : initialized) s += n + ": initialized\n";
    for (const auto& n : unused) s += n + ": unused\n";
    return s;
  }
};

// Fine-tuning load: copies name-matched tensors, leaves parameters the
// checkpoint lacks at their current initialization, and refuses shape
// conflicts outright. Reports per-layer outcomes.
template <Real T>
LoadReport load_pretrained(AnomalyNet<T>& net, const Checkpoint& ck) {
  LoadReport report;
  std::vector<std::pair<Tensor<T>*, const Tensor<float>*>> plan;
  std::set<std::string> target_names;
  std::vector<std::string> layer_order;
  std::set<std::string> layers_loaded, layers_missing;
  for (auto& p : net.parameters()) {
    target_names.insert(p.name);
    const std::string layer = p.name.substr(0, p.name.find('/'));
    if (layer_order.empty() || layer_order.back() != layer) layer_order.push_back(layer);
    const Tensor<float>* src = ck.get(p.name);
    if (!src) {
      layers_missing.insert(layer);
      continue;
    }
    if (!(src->shape() == p.value->shape()))
      fail(ErrorKind::conflict, p.name + ": checkpoint " + src->shape().to_string() + " vs network " +
                                    p.value->shape().to_string());
    plan.emplace_back(p.value, src);
    layers_loaded.insert(layer);
  }
  for (auto& [dst, src] : plan) *dst = src->template cast<T>();
  for (const auto& layer : layer_order) {
    if (layers_missing.count(layer))
      report.initialized.push_back(layer);
    else
      report.matched.push_back(layer);
  }
  for (const auto& e : ck.entries)
    if (e.name.rfind("meta/", 0) != 0 && !target_names.count(e.name)) report.unused.push_back(e.name);
  return report;
}

}  // namespace cube3d::model
