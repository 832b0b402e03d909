#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "cube3d/gemm.hpp"
#include "cube3d/tensor.hpp"

namespace cube3d::nn {

template <Real T>
struct Conv3DGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_kernel;
  Tensor<T> grad_bias;
};

namespace detail {

struct ConvGeometry {
  std::size_t n, t, h, w, c_in;
  std::size_t kt, kh, kw, c_out;
  std::size_t pt, ph, pw;

  std::size_t patch() const { return kt * kh * kw * c_in; }
};

template <Real T>
ConvGeometry geometry(const Tensor<T>& x, const Tensor<T>& kernel) {
  if (x.rank() != 5) fail(ErrorKind::shape, "conv3d input must be N x T x H x W x C, got " + x.shape().to_string());
  if (kernel.rank() != 5) fail(ErrorKind::shape, "conv3d kernel must be rank 5");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), x.dim(4),
                 kernel.dim(0), kernel.dim(1), kernel.dim(2), kernel.dim(4),
                 (kernel.dim(0) - 1) / 2, (kernel.dim(1) - 1) / 2, (kernel.dim(2) - 1) / 2};
  if (kernel.dim(3) != g.c_in)
    fail(ErrorKind::shape, "conv3d channel mismatch: input has " + std::to_string(g.c_in) + ", kernel expects " +
                               std::to_string(kernel.dim(3)));
  return g;
}

// Number of output rows (fixed n, t) gathered into one im2col block. Wider
// blocks amortize streaming the kernel matrix through cache.
inline std::size_t rows_per_block(const ConvGeometry& g) {
  const std::size_t target_m = 192;
  const std::size_t max_elems = std::size_t{1} << 22;
  std::size_t rows = std::max<std::size_t>(1, target_m / g.w);
  while (rows > 1 && rows * g.w * g.patch() > max_elems) --rows;
  return std::min(rows, g.h);
}

// Fills col[(r * W + w) * patch + tap * C_in + c] for output rows h0..h0+rows
// of slice (n, t); taps falling in the zero padding are 0.
template <Real T>
void im2col(const T* x, const ConvGeometry& g, std::size_t n, std::size_t t, std::size_t h0, std::size_t rows,
            T* col) {
  const std::size_t patch = g.patch();
  std::fill(col, col + rows * g.w * patch, T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t h = h0 + r;
    for (std::size_t dt = 0; dt < g.kt; ++dt) {
      const std::ptrdiff_t ts = static_cast<std::ptrdiff_t>(t + dt) - static_cast<std::ptrdiff_t>(g.pt);
      if (ts < 0 || ts >= static_cast<std::ptrdiff_t>(g.t)) continue;
      for (std::size_t dh = 0; dh < g.kh; ++dh) {
        const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + dh) - static_cast<std::ptrdiff_t>(g.ph);
        if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(g.h)) continue;
        const T* src_row = x + ((n * g.t + static_cast<std::size_t>(ts)) * g.h + static_cast<std::size_t>(hs)) * g.w * g.c_in;
        for (std::size_t dw = 0; dw < g.kw; ++dw) {
          const std::size_t tap = (dt * g.kh + dh) * g.kw + dw;
          // valid output columns: 0 <= w + dw - pw < W
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(dw) - static_cast<std::ptrdiff_t>(g.pw);
          const std::ptrdiff_t w_lo = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t w_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.w),
                                                               static_cast<std::ptrdiff_t>(g.w) - shift);
          for (std::ptrdiff_t w = w_lo; w < w_hi; ++w) {
            const T* src = src_row + static_cast<std::size_t>(w + shift) * g.c_in;
            T* dst = col + (r * g.w + static_cast<std::size_t>(w)) * patch + tap * g.c_in;
            std::copy_n(src, g.c_in, dst);
          }
        }
      }
    }
  }
}

// Same-padded, stride-1 3D convolution: out = bias + im2col(x) * K.
template <Real T>
Tensor<T> conv3d_same(const Tensor<T>& x, const Tensor<T>& kernel, const T* bias) {
  const ConvGeometry g = geometry(x, kernel);
  Tensor<T> out(Shape{g.n, g.t, g.h, g.w, g.c_out});
  const std::size_t rows = rows_per_block(g);
  const std::size_t blocks_per_slice = (g.h + rows - 1) / rows;
  const std::size_t total = g.n * g.t * blocks_per_slice;
  const std::size_t patch = g.patch();
  const T* xd = x.raw();
  const T* kd = kernel.raw();
  T* od = out.raw();
#pragma omp parallel
  {
    std::vector<T> col(rows * g.w * patch);
#pragma omp for schedule(static)
    for (std::ptrdiff_t job = 0; job < static_cast<std::ptrdiff_t>(total); ++job) {
      const std::size_t slice = static_cast<std::size_t>(job) / blocks_per_slice;
      const std::size_t h0 = (static_cast<std::size_t>(job) % blocks_per_slice) * rows;
      const std::size_t nrows = std::min(rows, g.h - h0);
      const std::size_t n = slice / g.t, t = slice % g.t;
      im2col(xd, g, n, t, h0, nrows, col.data());
      T* dst = od + ((n * g.t + t) * g.h + h0) * g.w * g.c_out;
      const std::size_t m = nrows * g.w;
      if (bias)
        for (std::size_t i = 0; i < m; ++i) std::copy_n(bias, g.c_out, dst + i * g.c_out);
      gemm::accumulate<T>(m, g.c_out, patch, gemm::MatrixView<T>{col.data(), patch, 1}, kd, g.c_out, dst, g.c_out);
    }
  }
  return out;
}

// K'[dt,dh,dw,o,c] = K[kt-1-dt, kh-1-dh, kw-1-dw, c, o]; convolving the output
// gradient with K' yields the input gradient.
template <Real T>
Tensor<T> flip_transpose_kernel(const Tensor<T>& k) {
  const std::size_t kt = k.dim(0), kh = k.dim(1), kw = k.dim(2), ci = k.dim(3), co = k.dim(4);
  Tensor<T> out(Shape{kt, kh, kw, co, ci});
  for (std::size_t dt = 0; dt < kt; ++dt)
    for (std::size_t dh = 0; dh < kh; ++dh)
      for (std::size_t dw = 0; dw < kw; ++dw) {
        const T* src = k.raw() + (((kt - 1 - dt) * kh + (kh - 1 - dh)) * kw + (kw - 1 - dw)) * ci * co;
        T* dst = out.raw() + ((dt * kh + dh) * kw + dw) * co * ci;
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t o = 0; o < co; ++o) dst[o * ci + c] = src[c * co + o];
      }
  return out;
}

}  // namespace detail

// 3D convolution over N x T x H x W x C activations. Kernel layout is
// kt x kh x kw x c_in x c_out with odd spatial/temporal extents; stride is
// 1 on every axis and borders are zero-padded so T, H, W are preserved.
template <Real T>
struct Conv3D {
  Tensor<T> kernel;
  Tensor<T> bias;

  static Conv3D make(std::size_t c_in, std::size_t c_out, std::size_t k = 3) {
    return make(c_in, c_out, k, k, k);
  }
  static Conv3D make(std::size_t c_in, std::size_t c_out, std::size_t kt, std::size_t kh, std::size_t kw) {
    if (kt % 2 == 0 || kh % 2 == 0 || kw % 2 == 0)
      fail(ErrorKind::invalid_shape, "conv3d kernel extents must be odd for same padding");
    return Conv3D{Tensor<T>(Shape{kt, kh, kw, c_in, c_out}), Tensor<T>(Shape{c_out})};
  }

  std::size_t in_channels() const { return kernel.dim(3); }
  std::size_t out_channels() const { return kernel.dim(4); }

  Shape output_shape(const Shape& in) const {
    if (in.rank() != 5 || in[4] != in_channels())
      fail(ErrorKind::shape, "conv3d expects N x T x H x W x " + std::to_string(in_channels()) + ", got " +
                                 in.to_string());
    return Shape{in[0], in[1], in[2], in[3], out_channels()};
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (bias.size() != out_channels()) fail(ErrorKind::shape, "conv3d bias extent mismatch");
    return detail::conv3d_same(x, kernel, bias.raw());
  }

  // `want_grad_x` false leaves grad_x empty (first layer of a network).
  Conv3DGrads<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out, bool want_grad_x = true) const {
    const detail::ConvGeometry g = detail::geometry(x, kernel);
    if (!(grad_out.shape() == output_shape(x.shape())))
      fail(ErrorKind::shape, "conv3d grad_out " + grad_out.shape().to_string() + " does not match forward output");

    Conv3DGrads<T> grads{{}, Tensor<T>(kernel.shape()), Tensor<T>(bias.shape())};
    if (want_grad_x)
      grads.grad_x = detail::conv3d_same(grad_out, detail::flip_transpose_kernel(kernel), static_cast<const T*>(nullptr));

    const T* gd = grad_out.raw();
    const std::size_t positions = grad_out.size() / g.c_out;
    for (std::size_t i = 0; i < positions; ++i)
      for (std::size_t o = 0; o < g.c_out; ++o) grads.grad_bias[o] += gd[i * g.c_out + o];

    // grad_K (patch x C_out) += im2col(x)^T * grad_out, block by block in a
    // fixed order.
    const std::size_t rows = detail::rows_per_block(g);
    const std::size_t patch = g.patch();
    std::vector<T> col(rows * g.w * patch);
    for (std::size_t n = 0; n < g.n; ++n)
      for (std::size_t t = 0; t < g.t; ++t)
        for (std::size_t h0 = 0; h0 < g.h; h0 += rows) {
          const std::size_t nrows = std::min(rows, g.h - h0);
          detail::im2col(x.raw(), g, n, t, h0, nrows, col.data());
          const T* grow = gd + ((n * g.t + t) * g.h + h0) * g.w * g.c_out;
          gemm::accumulate<T>(patch, g.c_out, nrows * g.w, gemm::MatrixView<T>{col.data(), 1, patch}, grow, g.c_out,
                              grads.grad_kernel.raw(), g.c_out);
        }
    return grads;
  }
};

}  // namespace cube3d::nn
