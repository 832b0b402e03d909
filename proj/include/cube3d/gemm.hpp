#pragma once

#include <algorithm>
#include <cstddef>

namespace cube3d::gemm {

// Read-only strided view of a matrix operand: element (i, p) lives at
// data[i * row_stride + p * col_stride]. A transposed operand is the same
// buffer with the strides swapped.
template <typename T>
struct MatrixView {
  const T* data;
  std::size_t row_stride;
  std::size_t col_stride;

  const T& operator()(std::size_t i, std::size_t p) const { return data[i * row_stride + p * col_stride]; }
  MatrixView transposed() const { return {data, col_stride, row_stride}; }
};

namespace detail {

inline constexpr std::size_t kRowTile = 6;
inline constexpr std::size_t kDepthBlock = 256;

template <typename T>
inline constexpr std::size_t kColTile = 128 / sizeof(T);

template <typename T, std::size_t NR>
inline void full_tile(std::size_t kc, MatrixView<T> a, std::size_t i0, std::size_t p0, const T* b,
                      std::size_t ldb, T* c, std::size_t ldc) {
  constexpr std::size_t MR = kRowTile;
  T acc[MR][NR] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const T* brow = b + p * ldb;
    for (std::size_t r = 0; r < MR; ++r) {
      const T av = a(i0 + r, p0 + p);
      if constexpr (NR < kColTile<T>) {
        // GCC leaves narrow tiles scalar without the hint.
#pragma omp simd
        for (std::size_t q = 0; q < NR; ++q) acc[r][q] += av * brow[q];
      } else {
        for (std::size_t q = 0; q < NR; ++q) acc[r][q] += av * brow[q];
      }
    }
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t q = 0; q < NR; ++q) c[r * ldc + q] += acc[r][q];
}

template <typename T>
inline void edge_tile(std::size_t mr, std::size_t nr, std::size_t kc, MatrixView<T> a, std::size_t i0,
                      std::size_t p0, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  constexpr std::size_t MR = kRowTile;
  constexpr std::size_t NR = kColTile<T>;
  T acc[MR][NR] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const T* brow = b + p * ldb;
    for (std::size_t r = 0; r < mr; ++r) {
      const T av = a(i0 + r, p0 + p);
      for (std::size_t q = 0; q < nr; ++q) acc[r][q] += av * brow[q];
    }
  }
  for (std::size_t r = 0; r < mr; ++r)
    for (std::size_t q = 0; q < nr; ++q) c[r * ldc + q] += acc[r][q];
}

}  // namespace detail

// C[m x n] += A[m x k] * B[k x n]; B and C row-major with leading dims ldb/ldc.
// Each element of C is accumulated in a fixed order independent of the
// thread count, so results are bit-reproducible.
template <typename T>
void accumulate(std::size_t m, std::size_t n, std::size_t k, MatrixView<T> a, const T* b, std::size_t ldb, T* c,
                std::size_t ldc) {
  using namespace detail;
  constexpr std::size_t MR = kRowTile;
  constexpr std::size_t NR = kColTile<T>;
  if (m == 0 || n == 0 || k == 0) return;
  const std::size_t row_blocks = (m + MR - 1) / MR;
  const bool big = m * n * k > (1u << 20) && row_blocks > 1;
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, k - p0);
    const T* bblock = b + p0 * ldb;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(row_blocks); ++blk) {
      const std::size_t i0 = static_cast<std::size_t>(blk) * MR;
      const std::size_t mr = std::min(MR, m - i0);
      T* crow = c + i0 * ldc;
      const T* brow = bblock;
      if (mr < MR) {
        for (std::size_t j0 = 0; j0 < n; j0 += NR)
          edge_tile<T>(mr, std::min(NR, n - j0), kc, a, i0, p0, brow + j0, ldb, crow + j0, ldc);
        continue;
      }
      std::size_t j0 = 0;
      for (; j0 + NR <= n; j0 += NR) full_tile<T, NR>(kc, a, i0, p0, brow + j0, ldb, crow + j0, ldc);
      // Narrow remainders still get a register-blocked tile.
      if (n - j0 >= NR / 2) {
        full_tile<T, NR / 2>(kc, a, i0, p0, brow + j0, ldb, crow + j0, ldc);
        j0 += NR / 2;
      }
      if (n - j0 >= NR / 4) {
        full_tile<T, NR / 4>(kc, a, i0, p0, brow + j0, ldb, crow + j0, ldc);
        j0 += NR / 4;
      }
      if (n - j0 >= NR / 8) {
        full_tile<T, NR / 8>(kc, a, i0, p0, brow + j0, ldb, crow + j0, ldc);
        j0 += NR / 8;
      }
      if (j0 < n) edge_tile<T>(mr, n - j0, kc, a, i0, p0, brow + j0, ldb, crow + j0, ldc);
    }
  }
}

}  // namespace cube3d::gemm
