#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "cube3d/nn/mode.hpp"
#include "cube3d/tensor.hpp"

namespace cube3d::nn {

template <Real T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

// Subgradient 0 at x == 0.
template <Real T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  require_same_shape(x, grad_out, "relu grad_out");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

struct DropoutConfig {
  double rate = 0.6;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::config, "dropout rate must lie in [0, 1)");
  }
};

template <Real T>
struct DropoutResult {
  Tensor<T> output;
  Tensor<T> mask;  // 0 or 1 / (1 - rate) per element
};

// Inverted dropout: survivors are scaled at train time so eval is identity.
template <Real T>
DropoutResult<T> dropout_forward(const DropoutConfig& cfg, const Tensor<T>& x, Mode mode) {
  cfg.validate();
  if (mode == Mode::eval || cfg.rate == 0.0) return {x, Tensor<T>(x.shape(), T(1))};
  std::mt19937_64 rng(cfg.seed);
  const T scale = static_cast<T>(1.0 / (1.0 - cfg.rate));
  DropoutResult<T> r{Tensor<T>(x.shape()), Tensor<T>(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    // 53-bit uniform in [0, 1), independent of the library's distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const T keep = u >= cfg.rate ? scale : T(0);
    r.mask[i] = keep;
    r.output[i] = x[i] * keep;
  }
  return r;
}

template <Real T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& grad_out) {
  require_same_shape(mask, grad_out, "dropout grad_out");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

template <Real T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2 || logits.dim(1) < 2) fail(ErrorKind::shape, "softmax expects N x C with C >= 2");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.raw() + i * c;
    T mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(z[j] - mx));
    for (std::size_t j = 0; j < c; ++j) p[i * c + j] = static_cast<T>(std::exp(static_cast<double>(z[j] - mx)) / sum);
  }
  return p;
}

template <Real T>
struct LossResult {
  double loss;
  Tensor<T> grad_logits;
};

// Mean negative log-likelihood via log-sum-exp; grad = (softmax - onehot) / N.
template <Real T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(1) < 2) fail(ErrorKind::shape, "cross entropy expects N x C with C >= 2");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n)
    fail(ErrorKind::label, std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= c)
      fail(ErrorKind::label, "label " + std::to_string(labels[i]) + " out of range for " + std::to_string(c) + " classes");

  LossResult<T> r{0.0, softmax(logits)};
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.raw() + i * c;
    double mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max<double>(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    r.loss += mx + std::log(sum) - z[labels[i]];
  }
  r.loss /= static_cast<double>(n);
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) r.grad_logits[i * c + j] *= inv_n;
    r.grad_logits[i * c + labels[i]] -= inv_n;
  }
  return r;
}

}  // namespace cube3d::nn
