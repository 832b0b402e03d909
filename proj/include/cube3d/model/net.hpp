#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cube3d/nn/activation.hpp"
#include "cube3d/nn/batchnorm.hpp"
#include "cube3d/nn/conv3d.hpp"
#include "cube3d/nn/dense.hpp"
#include "cube3d/nn/mode.hpp"
#include "cube3d/nn/pool3d.hpp"
#include "cube3d/tensor.hpp"

namespace cube3d::model {

using nn::Mode;

struct ReluOp {};
struct FlattenOp {};
struct DropoutOp {
  double rate = 0.6;
};

template <Real T>
using LayerOp = std::variant<nn::Conv3D<T>, nn::BatchNorm<T>, ReluOp, nn::Pool3DConfig, DropoutOp, FlattenOp, nn::Dense<T>>;

template <Real T>
struct Layer {
  std::string name;
  LayerOp<T> op;
};

// Architecture knobs of the fine-tuned C3D-style network. `full()` is the
// 16x170x170x3 network with 14 outputs; `compact()` keeps the same topology
// with narrower layers for small inputs.
struct ModelConfig {
  std::array<std::size_t, 4> input{16, 170, 170, 3};  // T, H, W, C
  std::size_t num_classes = 14;
  std::array<std::size_t, 8> conv_channels{64, 128, 256, 256, 512, 512, 512, 512};
  std::size_t fc_width = 4096;
  double dropout_rate = 0.6;

  static ModelConfig full(std::size_t num_classes = 14) {
    ModelConfig c;
    c.num_classes = num_classes;
    return c;
  }

  static ModelConfig compact(std::size_t frames, std::size_t height, std::size_t width, std::size_t num_classes) {
    ModelConfig c;
    c.input = {frames, height, width, 3};
    c.num_classes = num_classes;
    c.conv_channels = {8, 16, 32, 32, 64, 64, 64, 64};
    c.fc_width = 128;
    return c;
  }

  void validate() const {
    if (num_classes < 2) fail(ErrorKind::config, "num_classes must be >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorKind::config, "dropout rate must lie in [0, 1)");
    for (std::size_t v : input)
      if (v == 0) fail(ErrorKind::config, "input extents must be positive");
    for (std::size_t v : conv_channels)
      if (v == 0) fail(ErrorKind::config, "conv widths must be positive");
    if (fc_width == 0) fail(ErrorKind::config, "fc width must be positive");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// normal: every weight ~ N(0, std^2). he: N(0, 2 / fan_in) per layer, which
// keeps activations from vanishing through the conv stack.
enum class InitScheme { normal, he };

inline InitScheme parse_init_scheme(const std::string& s) {
  if (s == "normal") return InitScheme::normal;
  if (s == "he") return InitScheme::he;
  fail(ErrorKind::config, "init scheme must be normal or he, got '" + s + "'");
}

struct InitSpec {
  std::uint64_t seed = 0;
  double std = 0.01;
  bool zero_head = false;  // classifier weights start at 0, so initial logits are uniform
  InitScheme scheme = InitScheme::normal;
};

template <Real T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

template <Real T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  bool learnable;
};

template <Real T>
struct ConstParamRef {
  std::string name;
  const Tensor<T>* value;
  bool learnable;
};

template <Real T>
using ParamGrads = std::vector<NamedTensor<T>>;

template <Real T>
struct LayerCache {
  Tensor<T> input;
  nn::BatchNormCache<T> bn;
  nn::PoolRecord pool;
  Tensor<T> mask;
};

template <Real T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
  Shape input_shape;
  Tensor<T> logits;
};

struct LayerShape {
  std::string name;
  Shape input;
  Shape output;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Sequential 3D ConvNet over N x T x H x W x C batches producing N x classes logits.
template <Real T>
class AnomalyNet {
 public:
  AnomalyNet() = default;
  explicit AnomalyNet(Shape sample_shape) : sample_shape_(std::move(sample_shape)) {
    if (sample_shape_.rank() != 4) fail(ErrorKind::shape, "sample shape must be T x H x W x C");
  }

  // Builder steps; each infers its input extent from the running shape.
  AnomalyNet& conv(std::string name, std::size_t c_out, std::size_t k = 3) {
    const Shape s = current_shape();
    return push(std::move(name), nn::Conv3D<T>::make(s.back(), c_out, k));
  }
  AnomalyNet& batch_norm(std::string name) {
    return push(std::move(name), nn::BatchNorm<T>::make(current_shape().back()));
  }
  AnomalyNet& relu(std::string name) { return push(std::move(name), ReluOp{}); }
  AnomalyNet& max_pool(std::string name, nn::Pool3DConfig cfg) { return push(std::move(name), cfg); }
  AnomalyNet& dropout(std::string name, double rate) {
    nn::DropoutConfig{rate, 0}.validate();
    return push(std::move(name), DropoutOp{rate});
  }
  AnomalyNet& flatten(std::string name = "flatten") { return push(std::move(name), FlattenOp{}); }
  AnomalyNet& dense(std::string name, std::size_t out) {
    const Shape s = current_shape();
    if (s.rank() != 2) fail(ErrorKind::shape, "dense layer '" + name + "' needs a flattened input");
    return push(std::move(name), nn::Dense<T>::make(s[1], out));
  }

  const Shape& sample_shape() const noexcept { return sample_shape_; }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }
  std::vector<Layer<T>>& layers() noexcept { return layers_; }
  std::size_t num_classes() const { return current_shape().back(); }

  const Layer<T>* find(std::string_view name) const {
    for (const auto& l : layers_)
      if (l.name == name) return &l;
    return nullptr;
  }

  Shape batch_shape(std::size_t n) const {
    const auto d = sample_shape_.dims();
    return Shape{n, d[0], d[1], d[2], d[3]};
  }

  // Symbolic per-layer shapes for a batch of `input`.
  std::vector<LayerShape> shape_trace(const Shape& input) const {
    std::vector<LayerShape> out;
    Shape s = input;
    for (const auto& l : layers_) {
      Shape next = layer_output_shape(l, s);
      out.push_back({l.name, s, next});
      s = std::move(next);
    }
    return out;
  }

  // Parameters in layer order: conv kernel/bias, BN gamma/beta (learnable)
  // then running_mean/running_var, dense weight/bias.
  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    for (auto& l : layers_) {
      if (auto* c = std::get_if<nn::Conv3D<T>>(&l.op)) {
        out.push_back({l.name + "/kernel", &c->kernel, true});
        out.push_back({l.name + "/bias", &c->bias, true});
      } else if (auto* b = std::get_if<nn::BatchNorm<T>>(&l.op)) {
        out.push_back({l.name + "/gamma", &b->gamma, true});
        out.push_back({l.name + "/beta", &b->beta, true});
        out.push_back({l.name + "/running_mean", &b->running_mean, false});
        out.push_back({l.name + "/running_var", &b->running_var, false});
      } else if (auto* d = std::get_if<nn::Dense<T>>(&l.op)) {
        out.push_back({l.name + "/weight", &d->weight, true});
        out.push_back({l.name + "/bias", &d->bias, true});
      }
    }
    return out;
  }

  std::vector<ConstParamRef<T>> parameters() const {
    std::vector<ConstParamRef<T>> out;
    for (auto& p : const_cast<AnomalyNet*>(this)->parameters()) out.push_back({p.name, p.value, p.learnable});
    return out;
  }

  std::size_t learnable_parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters())
      if (p.learnable) n += p.value->size();
    return n;
  }

  // Deterministic eval-mode forward without caching. `observer`, when set,
  // sees every layer's (name, input shape, output shape) as it runs.
  Tensor<T> infer(const Tensor<T>& x, const std::function<void(const LayerShape&)>& observer = {}) const {
    check_input(x);
    Tensor<T> a = x;
    for (const auto& l : layers_) {
      Tensor<T> next = std::visit([&](const auto& op) { return eval_layer(op, a); }, l.op);
      if (observer) observer({l.name, a.shape(), next.shape()});
      a = std::move(next);
    }
    return a;
  }

  // Cached forward for training. Train mode uses batch statistics (and
  // updates the running ones) and draws dropout masks from `dropout_seed`.
  ForwardCache<T> forward(const Tensor<T>& x, Mode mode, std::uint64_t dropout_seed = 0) {
    check_input(x);
    ForwardCache<T> cache;
    cache.input_shape = x.shape();
    cache.layers.resize(layers_.size());
    Tensor<T> a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& l = layers_[i];
      auto& lc = cache.layers[i];
      Tensor<T> next;
      if (auto* c = std::get_if<nn::Conv3D<T>>(&l.op)) {
        next = c->forward(a);
        lc.input = std::move(a);
      } else if (auto* b = std::get_if<nn::BatchNorm<T>>(&l.op)) {
        next = nn::batchnorm_forward(*b, a, mode, mode == Mode::train ? &lc.bn : nullptr);
      } else if (std::holds_alternative<ReluOp>(l.op)) {
        next = nn::relu(a);
        lc.input = std::move(a);
      } else if (auto* p = std::get_if<nn::Pool3DConfig>(&l.op)) {
        auto r = nn::maxpool3d_forward(*p, a);
        next = std::move(r.output);
        lc.pool = std::move(r.record);
      } else if (auto* d = std::get_if<DropoutOp>(&l.op)) {
        const nn::DropoutConfig cfg{d->rate, detail::splitmix64(dropout_seed ^ detail::splitmix64(i + 1))};
        auto r = nn::dropout_forward(cfg, a, mode);
        next = std::move(r.output);
        lc.mask = std::move(r.mask);
      } else if (std::holds_alternative<FlattenOp>(l.op)) {
        next = a.reshaped(Shape{a.dim(0), a.size() / a.dim(0)});
      } else if (auto* f = std::get_if<nn::Dense<T>>(&l.op)) {
        next = f->forward(a);
        lc.input = std::move(a);
      }
      a = std::move(next);
    }
    cache.logits = std::move(a);
    return cache;
  }

  // Gradients for every learnable parameter, in parameters() order, plus the
  // input gradient when `grad_input` is non-null.
  ParamGrads<T> backward(const ForwardCache<T>& cache, const Tensor<T>& grad_logits,
                         Tensor<T>* grad_input = nullptr) const {
    if (cache.layers.size() != layers_.size() || cache.logits.empty())
      fail(ErrorKind::state, "backward needs a cached forward of this network");
    require_same_shape(cache.logits, grad_logits, "grad_logits");

    std::vector<std::vector<NamedTensor<T>>> per_layer(layers_.size());
    Tensor<T> g = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& l = layers_[i];
      const auto& lc = cache.layers[i];
      if (auto* c = std::get_if<nn::Conv3D<T>>(&l.op)) {
        auto r = c->backward(lc.input, g, i > 0 || grad_input);
        per_layer[i] = {{l.name + "/kernel", std::move(r.grad_kernel)}, {l.name + "/bias", std::move(r.grad_bias)}};
        g = std::move(r.grad_x);
      } else if (auto* b = std::get_if<nn::BatchNorm<T>>(&l.op)) {
        if (lc.bn.x_hat.empty())
          fail(ErrorKind::state, "layer " + l.name + " has no train-mode cache; run forward in train mode");
        auto r = nn::batchnorm_backward(*b, lc.bn, g);
        per_layer[i] = {{l.name + "/gamma", std::move(r.grad_gamma)}, {l.name + "/beta", std::move(r.grad_beta)}};
        g = std::move(r.grad_x);
      } else if (std::holds_alternative<ReluOp>(l.op)) {
        g = nn::relu_backward(lc.input, g);
      } else if (std::holds_alternative<nn::Pool3DConfig>(l.op)) {
        g = nn::maxpool3d_backward(lc.pool, g);
      } else if (std::holds_alternative<DropoutOp>(l.op)) {
        g = nn::dropout_backward(lc.mask, g);
      } else if (std::holds_alternative<FlattenOp>(l.op)) {
        const Shape in = i == 0 ? cache.input_shape : layer_input_shape(cache, i);
        g = g.reshaped(in);
      } else if (auto* f = std::get_if<nn::Dense<T>>(&l.op)) {
        auto r = f->backward(lc.input, g);
        per_layer[i] = {{l.name + "/weight", std::move(r.grad_weight)}, {l.name + "/bias", std::move(r.grad_bias)}};
        g = std::move(r.grad_x);
      }
    }
    if (grad_input) *grad_input = std::move(g);
    ParamGrads<T> out;
    for (auto& v : per_layer)
      for (auto& nt : v) out.push_back(std::move(nt));
    return out;
  }

 private:
  template <typename Op>
  AnomalyNet& push(std::string name, Op op) {
    if (name.empty()) fail(ErrorKind::config, "layer names must be non-empty");
    if (find(name)) fail(ErrorKind::config, "duplicate layer name " + name);
    Layer<T> layer{std::move(name), std::move(op)};
    layer_output_shape(layer, current_shape());  // validates the chain
    layers_.push_back(std::move(layer));
    return *this;
  }

  Shape current_shape() const {
    if (sample_shape_.rank() == 0) fail(ErrorKind::state, "network has no input shape");
    Shape s = batch_shape(1);
    for (const auto& l : layers_) s = layer_output_shape(l, s);
    return s;
  }

  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 5) fail(ErrorKind::shape, "network input must be N x T x H x W x C, got " + x.shape().to_string());
    if (!(x.shape() == batch_shape(x.dim(0))))
      fail(ErrorKind::shape, "network expects N x " + sample_shape_.to_string() + ", got " + x.shape().to_string());
  }

  // Shape feeding layer i, recovered from the cache without storing it.
  Shape layer_input_shape(const ForwardCache<T>& cache, std::size_t i) const {
    Shape s = cache.input_shape;
    for (std::size_t j = 0; j < i; ++j) s = layer_output_shape(layers_[j], s);
    return s;
  }

  static Shape layer_output_shape(const Layer<T>& l, const Shape& in) {
    return std::visit(
        [&](const auto& op) -> Shape {
          using Op = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<Op, nn::Conv3D<T>>) {
            return op.output_shape(in);
          } else if constexpr (std::is_same_v<Op, nn::BatchNorm<T>>) {
            if (in.back() != op.features())
              fail(ErrorKind::shape, "batch norm " + l.name + " feature mismatch on " + in.to_string());
            return in;
          } else if constexpr (std::is_same_v<Op, nn::Pool3DConfig>) {
            return nn::pool3d_output_shape(op, in);
          } else if constexpr (std::is_same_v<Op, FlattenOp>) {
            return Shape{in[0], in.numel() / in[0]};
          } else if constexpr (std::is_same_v<Op, nn::Dense<T>>) {
            return op.output_shape(in);
          } else {
            return in;
          }
        },
        l.op);
  }

  static Tensor<T> eval_layer(const nn::Conv3D<T>& op, const Tensor<T>& a) { return op.forward(a); }
  static Tensor<T> eval_layer(const nn::BatchNorm<T>& op, const Tensor<T>& a) { return nn::batchnorm_infer(op, a); }
  static Tensor<T> eval_layer(const ReluOp&, const Tensor<T>& a) { return nn::relu(a); }
  static Tensor<T> eval_layer(const nn::Pool3DConfig& op, const Tensor<T>& a) {
    return nn::maxpool3d_forward(op, a).output;
  }
  static Tensor<T> eval_layer(const DropoutOp&, const Tensor<T>& a) { return a; }
  static Tensor<T> eval_layer(const FlattenOp&, const Tensor<T>& a) {
    return a.reshaped(Shape{a.dim(0), a.size() / a.dim(0)});
  }
  static Tensor<T> eval_layer(const nn::Dense<T>& op, const Tensor<T>& a) { return op.forward(a); }

  Shape sample_shape_;
  std::vector<Layer<T>> layers_;
};

inline nn::Pool3DConfig spatial_pool() { return {{1, 2, 2}, {1, 2, 2}, true}; }
inline nn::Pool3DConfig cube_pool() { return {{2, 2, 2}, {2, 2, 2}, true}; }

// The fine-tuned network: conv1 + BN1 + pool1 (spatial only), conv2 +
// pool2, two conv pairs 3a/3b, 4a/4b, 5a/5b each followed by a pool, BN2,
// flatten, fc6 + dropout, BN3, fc7 + dropout, fc9.
template <Real T>
AnomalyNet<T> build_model(const ModelConfig& cfg) {
  cfg.validate();
  const auto& ch = cfg.conv_channels;
  AnomalyNet<T> net(Shape{cfg.input[0], cfg.input[1], cfg.input[2], cfg.input[3]});
  net.conv("conv1", ch[0]).batch_norm("batchNormalization_1").relu("relu1").max_pool("pool1", spatial_pool());
  net.conv("conv2", ch[1]).relu("relu2").max_pool("pool2", cube_pool());
  net.conv("conv3a", ch[2]).relu("relu3a").conv("conv3b", ch[3]).relu("relu3b").max_pool("pool3", cube_pool());
  net.conv("conv4a", ch[4]).relu("relu4a").conv("conv4b", ch[5]).relu("relu4b").max_pool("pool4", cube_pool());
  net.conv("conv5a", ch[6]).relu("relu5a").conv("conv5b", ch[7]).relu("relu5b").max_pool("pool5", cube_pool());
  net.batch_norm("batchNormalization_2").flatten("flatten");
  net.dense("fc6", cfg.fc_width).relu("relu6").dropout("dropout6", cfg.dropout_rate);
  net.batch_norm("batchNormalization_3");
  net.dense("fc7", cfg.fc_width).relu("relu7").dropout("dropout7", cfg.dropout_rate);
  net.dense("fc9", cfg.num_classes);
  return net;
}

template <Real T>
AnomalyNet<T> build_model(std::size_t num_classes) {
  return build_model<T>(ModelConfig::full(num_classes));
}

// Name of the classifier head: the last dense layer.
template <Real T>
std::string head_name(const AnomalyNet<T>& net) {
  for (std::size_t i = net.layers().size(); i-- > 0;)
    if (std::holds_alternative<nn::Dense<T>>(net.layers()[i].op)) return net.layers()[i].name;
  return {};
}

// Conv and dense weights ~ N(0, std^2) from one seeded stream in layer
// order; biases 0; BN gamma 1, beta 0, running mean 0, running var 1.
template <Real T>
void init_weights(AnomalyNet<T>& net, const InitSpec& spec) {
  if (spec.scheme == InitScheme::normal && !(spec.std > 0.0)) fail(ErrorKind::config, "init std must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto draw = [&](std::size_t fan_in) {
    const double s = spec.scheme == InitScheme::he ? std::sqrt(2.0 / static_cast<double>(fan_in)) : spec.std;
    return static_cast<T>(s * unit(rng));
  };
  const std::string head = head_name(net);
  for (auto& l : net.layers()) {
    if (auto* c = std::get_if<nn::Conv3D<T>>(&l.op)) {
      const std::size_t fan_in = c->kernel.size() / c->out_channels();
      for (auto& v : c->kernel.data()) v = draw(fan_in);
      c->bias.fill(T(0));
    } else if (auto* b = std::get_if<nn::BatchNorm<T>>(&l.op)) {
      b->gamma.fill(T(1));
      b->beta.fill(T(0));
      b->running_mean.fill(T(0));
      b->running_var.fill(T(1));
    } else if (auto* d = std::get_if<nn::Dense<T>>(&l.op)) {
      if (spec.zero_head && l.name == head)
        d->weight.fill(T(0));
      else
        for (auto& v : d->weight.data()) v = draw(d->weight.dim(0));
      d->bias.fill(T(0));
    }
  }
}

// Every learnable weight and bias set to 0 (BN layers keep gamma 1, beta 0).
template <Real T>
void zero_weights(AnomalyNet<T>& net) {
  for (auto& p : net.parameters())
    if (p.learnable && p.name.find("/gamma") == std::string::npos) p.value->fill(T(0));
}

}  // namespace cube3d::model
