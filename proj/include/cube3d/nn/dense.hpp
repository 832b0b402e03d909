#pragma once

#include <cstddef>

#include "cube3d/gemm.hpp"
#include "cube3d/tensor.hpp"

namespace cube3d::nn {

template <Real T>
struct DenseGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;
};

// y = x W + b with x: N x in, W: in x out.
template <Real T>
struct Dense {
  Tensor<T> weight;
  Tensor<T> bias;

  static Dense make(std::size_t in, std::size_t out) {
    return Dense{Tensor<T>(Shape{in, out}), Tensor<T>(Shape{out})};
  }

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Shape output_shape(const Shape& in) const {
    if (in.rank() != 2 || in[1] != in_features())
      fail(ErrorKind::shape, "dense layer expects N x " + std::to_string(in_features()) + ", got " + in.to_string());
    return Shape{in[0], out_features()};
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    const Shape out_shape = output_shape(x.shape());
    const std::size_t n = x.dim(0), in = in_features(), out = out_features();
    Tensor<T> y(out_shape);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(bias.raw(), out, y.raw() + i * out);
    gemm::accumulate<T>(n, out, in, gemm::MatrixView<T>{x.raw(), in, 1}, weight.raw(), out, y.raw(), out);
    return y;
  }

  DenseGrads<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out) const {
    const Shape out_shape = output_shape(x.shape());
    if (!(grad_out.shape() == out_shape))
      fail(ErrorKind::shape, "dense grad_out " + grad_out.shape().to_string() + " vs " + out_shape.to_string());
    const std::size_t n = x.dim(0), in = in_features(), out = out_features();
    DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), Tensor<T>(bias.shape())};
    // grad_x = grad_out W^T as row dot products; both operands are contiguous.
    const T* wd = weight.raw();
    const T* gd = grad_out.raw();
    T* gx = g.grad_x.raw();
#pragma omp parallel for schedule(static) if (in * out > (1u << 16))
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(in); ++pi) {
      const std::size_t p = static_cast<std::size_t>(pi);
      const T* wrow = wd + p * out;
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = gd + i * out;
        T acc = 0;
        for (std::size_t o = 0; o < out; ++o) acc += grow[o] * wrow[o];
        gx[i * in + p] = acc;
      }
    }
    // grad_W = x^T grad_out
    gemm::accumulate<T>(in, out, n, gemm::MatrixView<T>{x.raw(), 1, in}, grad_out.raw(), out, g.grad_weight.raw(), out);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o) g.grad_bias[o] += grad_out[i * out + o];
    return g;
  }
};

}  // namespace cube3d::nn
