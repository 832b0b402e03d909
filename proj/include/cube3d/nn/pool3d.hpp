#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cube3d/tensor.hpp"

namespace cube3d::nn {

struct Pool3DConfig {
  std::array<std::size_t, 3> window{2, 2, 2};  // t, h, w
  std::array<std::size_t, 3> stride{2, 2, 2};
  bool ceil_mode = true;

  void validate() const {
    for (std::size_t a = 0; a < 3; ++a)
      if (window[a] == 0 || stride[a] == 0) fail(ErrorKind::config, "pool window and stride must be >= 1");
  }
};

// floor: (in - window) / stride + 1, window must fit.
// ceil: ceil((in - window) / stride) + 1, the last window may run past the
// end and is clipped; an input shorter than the window gives one cell.
inline std::size_t pooled_extent(std::size_t in, std::size_t window, std::size_t stride, bool ceil_mode) {
  if (in < window) {
    if (!ceil_mode)
      fail(ErrorKind::shape, "pool window " + std::to_string(window) + " larger than input extent " +
                                 std::to_string(in));
    return 1;
  }
  const std::size_t span = in - window;
  if (!ceil_mode) return span / stride + 1;
  std::size_t out = (span + stride - 1) / stride + 1;
  // A last window that would start past the input holds no elements.
  if ((out - 1) * stride >= in) --out;
  return out;
}

inline Shape pool3d_output_shape(const Pool3DConfig& cfg, const Shape& in) {
  cfg.validate();
  if (in.rank() != 5) fail(ErrorKind::shape, "max pool input must be rank 5, got " + in.to_string());
  return Shape{in[0], pooled_extent(in[1], cfg.window[0], cfg.stride[0], cfg.ceil_mode),
               pooled_extent(in[2], cfg.window[1], cfg.stride[1], cfg.ceil_mode),
               pooled_extent(in[3], cfg.window[2], cfg.stride[2], cfg.ceil_mode), in[4]};
}

// Winning flat input index for every output cell, kept for the backward pass.
struct PoolRecord {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::size_t> argmax;
};

template <Real T>
struct PoolResult {
  Tensor<T> output;
  PoolRecord record;
};

// Ties resolve to the lowest flat index (first in t, h, w scan order).
template <Real T>
PoolResult<T> maxpool3d_forward(const Pool3DConfig& cfg, const Tensor<T>& x) {
  const Shape out_shape = pool3d_output_shape(cfg, x.shape());
  const std::size_t N = x.dim(0), Ti = x.dim(1), Hi = x.dim(2), Wi = x.dim(3), C = x.dim(4);
  const std::size_t To = out_shape[1], Ho = out_shape[2], Wo = out_shape[3];
  PoolResult<T> res{Tensor<T>(out_shape), PoolRecord{x.shape(), out_shape, std::vector<std::size_t>(out_shape.numel())}};
  const T* xd = x.raw();
  T* od = res.output.raw();
  std::size_t* am = res.record.argmax.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < static_cast<std::ptrdiff_t>(N * To); ++job) {
    const std::size_t n = static_cast<std::size_t>(job) / To, to = static_cast<std::size_t>(job) % To;
    const std::size_t t0 = to * cfg.stride[0], t1 = std::min(Ti, t0 + cfg.window[0]);
    for (std::size_t ho = 0; ho < Ho; ++ho) {
      const std::size_t h0 = ho * cfg.stride[1], h1 = std::min(Hi, h0 + cfg.window[1]);
      for (std::size_t wo = 0; wo < Wo; ++wo) {
        const std::size_t w0 = wo * cfg.stride[2], w1 = std::min(Wi, w0 + cfg.window[2]);
        const std::size_t out_base = (((n * To + to) * Ho + ho) * Wo + wo) * C;
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = ((n * Ti + t0) * Hi + h0) * Wi * C + w0 * C + c;
          T best_v = xd[best];
          for (std::size_t t = t0; t < t1; ++t)
            for (std::size_t h = h0; h < h1; ++h)
              for (std::size_t w = w0; w < w1; ++w) {
                const std::size_t idx = (((n * Ti + t) * Hi + h) * Wi + w) * C + c;
                if (xd[idx] > best_v) {
                  best_v = xd[idx];
                  best = idx;
                }
              }
          od[out_base + c] = best_v;
          am[out_base + c] = best;
        }
      }
    }
  }
  return res;
}

template <Real T>
Tensor<T> maxpool3d_backward(const PoolRecord& record, const Tensor<T>& grad_out) {
  if (!(grad_out.shape() == record.output_shape) || record.argmax.size() != grad_out.size())
    fail(ErrorKind::shape, "max pool grad_out " + grad_out.shape().to_string() + " does not match record " +
                               record.output_shape.to_string());
  Tensor<T> grad_x(record.input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_x[record.argmax[i]] += grad_out[i];
  return grad_x;
}

}  // namespace cube3d::nn
