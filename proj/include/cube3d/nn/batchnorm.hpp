#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cube3d/nn/mode.hpp"
#include "cube3d/tensor.hpp"

namespace cube3d::nn {

// Per-feature normalization over the last axis. On 5-D activations the
// statistics pool over batch x T x H x W, one (gamma, beta) per channel.
template <Real T>
struct BatchNorm {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double epsilon = 1e-5;
  double stat_momentum = 0.1;

  static BatchNorm make(std::size_t features) {
    return BatchNorm{Tensor<T>(Shape{features}, T(1)), Tensor<T>(Shape{features}, T(0)),
                     Tensor<T>(Shape{features}, T(0)), Tensor<T>(Shape{features}, T(1))};
  }

  std::size_t features() const { return gamma.size(); }
};

template <Real T>
struct BatchNormCache {
  Tensor<T> x_hat;
  std::vector<T> inv_std;
};

template <Real T>
struct BatchNormGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_gamma;
  Tensor<T> grad_beta;
};

namespace detail {

template <Real T>
std::size_t bn_features(const BatchNorm<T>& layer, const Tensor<T>& x) {
  const std::size_t f = layer.features();
  if (x.rank() < 2 || x.shape().back() != f)
    fail(ErrorKind::shape, "batch norm over " + std::to_string(f) + " features got " + x.shape().to_string());
  if (layer.beta.size() != f || layer.running_mean.size() != f || layer.running_var.size() != f)
    fail(ErrorKind::shape, "batch norm parameter extents disagree");
  return f;
}

}  // namespace detail

// Train mode normalizes with the biased batch statistics and folds them into
// the running estimates; eval mode uses the running estimates only. When
// `cache` is given in train mode it receives what backward needs.
template <Real T>
Tensor<T> batchnorm_forward(BatchNorm<T>& layer, const Tensor<T>& x, Mode mode, BatchNormCache<T>* cache = nullptr) {
  const std::size_t f = detail::bn_features(layer, x);
  const std::size_t m = x.size() / f;
  const T* xd = x.raw();
  Tensor<T> y(x.shape());
  T* yd = y.raw();

  if (mode == Mode::eval) {
    std::vector<T> scale(f), shift(f);
    for (std::size_t c = 0; c < f; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) + layer.epsilon);
      scale[c] = static_cast<T>(layer.gamma[c] * inv);
      shift[c] = static_cast<T>(layer.beta[c] - layer.gamma[c] * layer.running_mean[c] * inv);
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < f; ++c) yd[i * f + c] = xd[i * f + c] * scale[c] + shift[c];
    return y;
  }

  if (m < 2)
    fail(ErrorKind::degenerate_batch, "train-mode batch norm needs >= 2 values per feature, got " + std::to_string(m));

  // Two passes in double: mean, then centered second moment.
  std::vector<double> mean(f, 0.0), var(f, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < f; ++c) mean[c] += xd[i * f + c];
  for (double& v : mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < f; ++c) {
      const double d = xd[i * f + c] - mean[c];
      var[c] += d * d;
    }
  for (double& v : var) v /= static_cast<double>(m);

  std::vector<T> inv_std(f);
  for (std::size_t c = 0; c < f; ++c) inv_std[c] = static_cast<T>(1.0 / std::sqrt(var[c] + layer.epsilon));

  Tensor<T> x_hat(x.shape());
  T* xh = x_hat.raw();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < f; ++c) {
      const T v = static_cast<T>((xd[i * f + c] - mean[c]) * inv_std[c]);
      xh[i * f + c] = v;
      yd[i * f + c] = layer.gamma[c] * v + layer.beta[c];
    }

  const double mom = layer.stat_momentum;
  for (std::size_t c = 0; c < f; ++c) {
    layer.running_mean[c] = static_cast<T>((1.0 - mom) * layer.running_mean[c] + mom * mean[c]);
    layer.running_var[c] = static_cast<T>((1.0 - mom) * layer.running_var[c] + mom * var[c]);
  }

  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <Real T>
Tensor<T> batchnorm_infer(const BatchNorm<T>& layer, const Tensor<T>& x) {
  BatchNorm<T> copy = layer;
  return batchnorm_forward(copy, x, Mode::eval);
}

// dx = inv_std / m * (m * dx_hat - sum(dx_hat) - x_hat * sum(dx_hat * x_hat)),
// with dx_hat = dy * gamma.
template <Real T>
BatchNormGrads<T> batchnorm_backward(const BatchNorm<T>& layer, const BatchNormCache<T>& cache,
                                     const Tensor<T>& grad_out) {
  if (cache.x_hat.empty() || cache.inv_std.empty())
    fail(ErrorKind::state, "batch norm backward without a cached train-mode forward");
  require_same_shape(cache.x_hat, grad_out, "batch norm grad_out");
  const std::size_t f = detail::bn_features(layer, grad_out);
  const std::size_t m = grad_out.size() / f;
  const T* g = grad_out.raw();
  const T* xh = cache.x_hat.raw();

  std::vector<double> sum_g(f, 0.0), sum_gx(f, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < f; ++c) {
      sum_g[c] += g[i * f + c];
      sum_gx[c] += static_cast<double>(g[i * f + c]) * xh[i * f + c];
    }

  BatchNormGrads<T> out{Tensor<T>(grad_out.shape()), Tensor<T>(Shape{f}), Tensor<T>(Shape{f})};
  for (std::size_t c = 0; c < f; ++c) {
    out.grad_beta[c] = static_cast<T>(sum_g[c]);
    out.grad_gamma[c] = static_cast<T>(sum_gx[c]);
  }
  T* dx = out.grad_x.raw();
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < f; ++c) {
      const double gamma = layer.gamma[c];
      const double v = gamma * cache.inv_std[c] *
                       (g[i * f + c] - inv_m * sum_g[c] - xh[i * f + c] * inv_m * sum_gx[c]);
      dx[i * f + c] = static_cast<T>(v);
    }
  return out;
}

}  // namespace cube3d::nn
