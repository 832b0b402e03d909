#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cube3d/model/net.hpp"

namespace cube3d::model {

// Per-sample shapes (batch axis dropped) as printed in the reference
// architecture table, row by row.
struct ReferenceRow {
  std::string layer;
  std::vector<std::size_t> input;
  std::vector<std::size_t> output;
};

inline std::vector<ReferenceRow> reference_table(std::size_t num_classes = 14) {
  return {
      {"conv1", {16, 170, 170, 64}, {16, 170, 170, 64}},
      {"batchNormalization_1", {16, 170, 170, 64}, {16, 170, 170, 64}},
      {"pool1", {16, 170, 170, 64}, {16, 85, 85, 64}},
      {"conv2", {16, 85, 85, 64}, {16, 85, 85, 128}},
      {"pool2", {8, 85, 85, 128}, {8, 43, 43, 128}},
      {"conv3a", {8, 43, 43, 128}, {8, 43, 43, 256}},
      {"conv3b", {8, 43, 43, 256}, {8, 43, 43, 256}},
      {"pool3", {8, 43, 43, 256}, {4, 22, 22, 256}},
      {"conv4a", {4, 22, 22, 256}, {4, 22, 22, 512}},
      {"conv4b", {4, 22, 22, 512}, {4, 22, 22, 512}},
      {"pool4", {4, 22, 22, 512}, {2, 11, 11, 512}},
      {"conv5a", {2, 11, 11, 512}, {2, 11, 11, 512}},
      {"conv5b", {2, 11, 11, 512}, {2, 11, 11, 512}},
      {"pool5", {2, 13, 13, 512}, {1, 6, 6, 512}},
      {"batchNormalization_2", {1, 6, 6, 512}, {1, 6, 6, 512}},
      {"fc6", {18432}, {4096}},
      {"batchNormalization_3", {4096}, {4096}},
      {"fc7", {4096}, {4096}},
      {"fc9", {4096}, {num_classes}},
  };
}

// Table cells known to contradict the rows around them: the realized shape
// follows the preceding layer's output instead.
struct KnownDeviation {
  std::string layer;
  std::string column;
  std::string note;
};

inline std::vector<KnownDeviation> documented_deviations() {
  return {
      {"conv1", "input", "table lists 16x170x170x64; the network input carries 3 channels"},
      {"pool5", "input", "table lists 2x13x13x512; conv5b emits 2x11x11x512, which ceil-pools to 1x6x6x512"},
      {"pool2", "input", "table lists 8x85x85x128; conv2 emits 16x85x85x128, pool2 then halves T"},
  };
}

struct AuditRow {
  std::string layer;
  Shape input;
  Shape output;
  std::optional<ReferenceRow> reference;
  bool input_matches = true;
  bool output_matches = true;
};

struct Deviation {
  std::string layer;
  std::string column;
  std::string expected;
  std::string realized;
  bool documented = false;
  std::string note;
};

struct ShapeAudit {
  std::vector<AuditRow> rows;
  std::vector<Deviation> deviations;
  std::vector<std::string> missing_layers;  // reference rows with no realized layer
  std::size_t learnable_parameters = 0;

  std::size_t undocumented() const {
    std::size_t n = missing_layers.size();
    for (const auto& d : deviations) n += d.documented ? 0 : 1;
    return n;
  }
  std::size_t output_deviations() const {
    std::size_t n = 0;
    for (const auto& d : deviations) n += d.column == "output" ? 1 : 0;
    return n;
  }
};

namespace detail {

inline std::vector<std::size_t> per_sample(const Shape& s) {
  return {s.dims().begin() + 1, s.dims().end()};
}

inline std::string dims_string(const std::vector<std::size_t>& d) {
  std::string out;
  for (std::size_t i = 0; i < d.size(); ++i) out += (i ? "x" : "") + std::to_string(d[i]);
  return out;
}

}  // namespace detail

// Builds the audit from realized (layer, input, output) shapes, e.g. from
// AnomalyNet::shape_trace or an observed forward pass. With `compare` set,
// every row named in the reference table is checked on both columns.
inline ShapeAudit audit_shapes(const std::vector<LayerShape>& realized, bool compare, std::size_t num_classes = 14) {
  ShapeAudit audit;
  const auto table = reference_table(num_classes);
  const auto known = documented_deviations();
  for (const auto& r : realized) {
    AuditRow row{r.name, r.input, r.output, std::nullopt};
    if (compare) {
      for (const auto& ref : table) {
        if (ref.layer != r.name) continue;
        row.reference = ref;
        const auto in = detail::per_sample(r.input), out = detail::per_sample(r.output);
        row.input_matches = in == ref.input;
        row.output_matches = out == ref.output;
        auto record = [&](const char* column, const std::vector<std::size_t>& want, const std::vector<std::size_t>& got) {
          Deviation d{r.name, column, detail::dims_string(want), detail::dims_string(got), false, {}};
          for (const auto& k : known)
            if (k.layer == r.name && k.column == column) {
              d.documented = true;
              d.note = k.note;
            }
          audit.deviations.push_back(std::move(d));
        };
        if (!row.input_matches) record("input", ref.input, in);
        if (!row.output_matches) record("output", ref.output, out);
      }
    }
    audit.rows.push_back(std::move(row));
  }
  if (compare)
    for (const auto& ref : table) {
      bool seen = false;
      for (const auto& r : realized) seen = seen || r.name == ref.layer;
      if (!seen) audit.missing_layers.push_back(ref.layer);
    }
  return audit;
}

template <Real T>
ShapeAudit shape_audit(const AnomalyNet<T>& net, const Shape& input, bool compare = true) {
  ShapeAudit a = audit_shapes(net.shape_trace(input), compare, net.num_classes());
  a.learnable_parameters = net.learnable_parameter_count();
  return a;
}

}  // namespace cube3d::model
