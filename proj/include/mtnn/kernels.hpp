#pragma once

// The three competing ways to form C = A x B^T, plus the plain product they
// build on:
//
//   gemm_nn        C = A x B, packed and cache-blocked, 6x16 register tile.
//   gemm_nt        C = A x B^T read straight out of B's rows. No packing, so
//                  every row block of A streams the whole of B again.
//   transpose_oop  tiled out-of-place transpose into a fresh buffer.
//   gemm_tnn       transpose_oop(B) into scratch, then gemm_nn. Scratch
//                  allocation and release are part of the call.
//
// Everything is single precision with float accumulation, alpha = 1, beta = 0.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <sstream>
#include <thread>
#include <vector>

#include "mtnn/matrix.hpp"

namespace mtnn {

struct KernelConfig {
  std::size_t gemm_tile_rows = 64;    // rows of A packed per macro block
  std::size_t gemm_tile_cols = 256;   // columns of B packed per macro block
  std::size_t gemm_tile_depth = 256;  // shared dimension per macro block
  std::size_t transpose_tile = 32;
  unsigned threads = 1;
  // Upper bound on scratch bytes gemm_tnn may request; exceeding it behaves
  // exactly like a failed allocation.
  std::size_t scratch_limit = std::numeric_limits<std::size_t>::max();
};

// Wall-clock split of one gemm_tnn call.
struct TnnPhases {
  double allocate = 0.0;
  double transpose = 0.0;
  double multiply = 0.0;
  double release = 0.0;
  double total() const noexcept { return allocate + transpose + multiply + release; }
};

namespace detail {

using vfloat16 = float __attribute__((vector_size(64)));

inline constexpr std::size_t kTileM = 6;
inline constexpr std::size_t kTileN = 16;

inline vfloat16 load16(const float* p) noexcept {
  vfloat16 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline float hsum(vfloat16 v) noexcept {
  float s = 0.0f;
  for (int l = 0; l < 16; ++l) s += v[l];
  return s;
}

template <typename Fn>
void for_row_ranges(std::size_t rows, unsigned threads, std::size_t grain, Fn&& fn) {
  const std::size_t max_parts = std::max<std::size_t>(1, rows / std::max<std::size_t>(grain, 1));
  const std::size_t parts = std::min<std::size_t>(std::max(1u, threads), max_parts);
  if (parts <= 1) {
    fn(std::size_t{0}, rows);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(parts - 1);
  const std::size_t chunk = (rows + parts - 1) / parts;
  for (std::size_t p = 1; p < parts; ++p) {
    const std::size_t lo = std::min(rows, p * chunk);
    const std::size_t hi = std::min(rows, lo + chunk);
    if (lo < hi) pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(std::size_t{0}, std::min(rows, chunk));
}

// acc[r] += a[p*6 + r] * b[p*16 .. p*16+15] over the packed depth, then C += acc.
inline void micro_tile(std::size_t depth, const float* __restrict a, const float* __restrict b,
                       float* __restrict c, std::size_t ldc, std::size_t mr, std::size_t nr) noexcept {
  vfloat16 acc[kTileM] = {};
  for (std::size_t p = 0; p < depth; ++p) {
    const vfloat16 bv = load16(b + p * kTileN);
    const float* ap = a + p * kTileM;
    for (std::size_t r = 0; r < kTileM; ++r) acc[r] += ap[r] * bv;
  }
  for (std::size_t r = 0; r < mr; ++r) {
    float* cr = c + r * ldc;
    for (std::size_t j = 0; j < nr; ++j) cr[j] += acc[r][j];
  }
}

// C[row_lo:row_hi) += A[row_lo:row_hi) x B, with A (m x k), B (k x n), C (m x n).
inline void nn_rows(const float* A, const float* B, float* C, std::size_t n, std::size_t k,
                    std::size_t row_lo, std::size_t row_hi, const KernelConfig& cfg) {
  const std::size_t mc = std::max<std::size_t>(1, cfg.gemm_tile_rows);
  const std::size_t nc = std::max<std::size_t>(1, cfg.gemm_tile_cols);
  const std::size_t kc = std::max<std::size_t>(1, cfg.gemm_tile_depth);
  const std::size_t rows = row_hi - row_lo;

  const std::size_t depth_cap = std::min(kc, k);
  const std::size_t cols_cap = (std::min(nc, n) + kTileN - 1) / kTileN * kTileN;
  const std::size_t rows_cap = (std::min(mc, rows) + kTileM - 1) / kTileM * kTileM;
  auto b_pack = std::make_unique_for_overwrite<float[]>(depth_cap * cols_cap);
  auto a_pack = std::make_unique_for_overwrite<float[]>(depth_cap * rows_cap);

  for (std::size_t j0 = 0; j0 < n; j0 += nc) {
    const std::size_t nb = std::min(nc, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kc) {
      const std::size_t kb = std::min(kc, k - p0);

      for (std::size_t jp = 0; jp < nb; jp += kTileN) {
        const std::size_t nr = std::min(kTileN, nb - jp);
        float* dst = b_pack.get() + jp * kb;
        for (std::size_t p = 0; p < kb; ++p) {
          const float* src = B + (p0 + p) * n + j0 + jp;
          float* d = dst + p * kTileN;
          std::size_t j = 0;
          for (; j < nr; ++j) d[j] = src[j];
          for (; j < kTileN; ++j) d[j] = 0.0f;
        }
      }

      for (std::size_t i0 = row_lo; i0 < row_hi; i0 += mc) {
        const std::size_t mb = std::min(mc, row_hi - i0);
        for (std::size_t ip = 0; ip < mb; ip += kTileM) {
          const std::size_t mr = std::min(kTileM, mb - ip);
          float* dst = a_pack.get() + ip * kb;
          for (std::size_t p = 0; p < kb; ++p) {
            float* d = dst + p * kTileM;
            std::size_t r = 0;
            for (; r < mr; ++r) d[r] = A[(i0 + ip + r) * k + p0 + p];
            for (; r < kTileM; ++r) d[r] = 0.0f;
          }
        }
        for (std::size_t jp = 0; jp < nb; jp += kTileN) {
          const std::size_t nr = std::min(kTileN, nb - jp);
          for (std::size_t ip = 0; ip < mb; ip += kTileM) {
            const std::size_t mr = std::min(kTileM, mb - ip);
            micro_tile(kb, a_pack.get() + ip * kb, b_pack.get() + jp * kb,
                       C + (i0 + ip) * n + j0 + jp, n, mr, nr);
          }
        }
      }
    }
  }
}

inline void nn(const float* A, const float* B, float* C, std::size_t m, std::size_t n,
               std::size_t k, const KernelConfig& cfg) {
  for_row_ranges(m, cfg.threads, kTileM * 4,
                 [&](std::size_t lo, std::size_t hi) { nn_rows(A, B, C, n, k, lo, hi, cfg); });
}

inline float dot(const float* a, const float* b, std::size_t k) noexcept {
  vfloat16 s0 = {}, s1 = {};
  std::size_t p = 0;
  for (; p + 32 <= k; p += 32) {
    s0 += load16(a + p) * load16(b + p);
    s1 += load16(a + p + 16) * load16(b + p + 16);
  }
  for (; p + 16 <= k; p += 16) s0 += load16(a + p) * load16(b + p);
  float s = hsum(s0 + s1);
  for (; p < k; ++p) s += a[p] * b[p];
  return s;
}

// C[i][j] = <A row i, B row j>. Two rows of A against two rows of B at a time;
// B is never copied, so successive output columns walk B with stride k.
inline void nt_rows(const float* A, const float* B, float* C, std::size_t n, std::size_t k,
                    std::size_t row_lo, std::size_t row_hi) noexcept {
  std::size_t i = row_lo;
  for (; i + 2 <= row_hi; i += 2) {
    const float* a0 = A + i * k;
    const float* a1 = a0 + k;
    float* c0 = C + i * n;
    float* c1 = c0 + n;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      const float* b0 = B + j * k;
      const float* b1 = b0 + k;
      vfloat16 s00 = {}, s01 = {}, s10 = {}, s11 = {};
      std::size_t p = 0;
      for (; p + 16 <= k; p += 16) {
        const vfloat16 x0 = load16(a0 + p), x1 = load16(a1 + p);
        const vfloat16 y0 = load16(b0 + p), y1 = load16(b1 + p);
        s00 += x0 * y0;
        s01 += x0 * y1;
        s10 += x1 * y0;
        s11 += x1 * y1;
      }
      float r00 = hsum(s00), r01 = hsum(s01), r10 = hsum(s10), r11 = hsum(s11);
      for (; p < k; ++p) {
        r00 += a0[p] * b0[p];
        r01 += a0[p] * b1[p];
        r10 += a1[p] * b0[p];
        r11 += a1[p] * b1[p];
      }
      c0[j] = r00;
      c0[j + 1] = r01;
      c1[j] = r10;
      c1[j + 1] = r11;
    }
    for (; j < n; ++j) {
      c0[j] = dot(a0, B + j * k, k);
      c1[j] = dot(a1, B + j * k, k);
    }
  }
  for (; i < row_hi; ++i) {
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] = dot(A + i * k, B + j * k, k);
  }
}

// dst (cols x rows) = src (rows x cols)^T over square tiles.
inline void transpose_rows(const float* src, float* dst, std::size_t rows, std::size_t cols,
                           std::size_t tile, std::size_t row_lo, std::size_t row_hi) noexcept {
  for (std::size_t i0 = row_lo; i0 < row_hi; i0 += tile) {
    const std::size_t i1 = std::min(row_hi, i0 + tile);
    for (std::size_t j0 = 0; j0 < cols; j0 += tile) {
      const std::size_t j1 = std::min(cols, j0 + tile);
      for (std::size_t i = i0; i < i1; ++i) {
        const float* s = src + i * cols;
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = s[j];
      }
    }
  }
}

inline void transpose(const float* src, float* dst, std::size_t rows, std::size_t cols,
                      const KernelConfig& cfg) {
  const std::size_t tile = std::max<std::size_t>(1, cfg.transpose_tile);
  for_row_ranges(rows, cfg.threads, tile, [&](std::size_t lo, std::size_t hi) {
    transpose_rows(src, dst, rows, cols, tile, lo, hi);
  });
}

inline std::unique_ptr<float[]> allocate_scratch(std::size_t elems, const KernelConfig& cfg) {
  const bool overflow = elems > std::numeric_limits<std::size_t>::max() / sizeof(float);
  if (overflow || elems * sizeof(float) > cfg.scratch_limit) {
    std::ostringstream os;
    os << "cannot reserve " << elems << " floats of scratch (limit " << cfg.scratch_limit
       << " bytes)";
    throw MemoryExhausted(os.str());
  }
  try {
    return std::make_unique_for_overwrite<float[]>(elems);
  } catch (const std::bad_alloc&) {
    std::ostringstream os;
    os << "allocation of " << elems << " floats failed";
    throw MemoryExhausted(os.str());
  }
}

inline std::string dims(const Matrix& x) {
  std::ostringstream os;
  os << x.rows() << "x" << x.cols();
  return os.str();
}

}  // namespace detail

/// C = A x B for A (m x k) and B (k x n).
inline Matrix gemm_nn(const Matrix& a, const Matrix& b, const KernelConfig& cfg = {}) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("gemm_nn: A is " + detail::dims(a) + " but B is " + detail::dims(b) +
                            " (A.cols must equal B.rows)");
  }
  Matrix c(a.rows(), b.cols());
  detail::nn(a.data().data(), b.data().data(), c.data().data(), a.rows(), b.cols(), a.cols(), cfg);
  return c;
}

/// C = A x B^T for A (m x k) and B (n x k), without forming B^T.
inline Matrix gemm_nt(const Matrix& a, const Matrix& b, const KernelConfig& cfg = {}) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("gemm_nt: A is " + detail::dims(a) + " but B is " + detail::dims(b) +
                            " (A.cols must equal B.cols)");
  }
  Matrix c(a.rows(), b.rows());
  const float* ap = a.data().data();
  const float* bp = b.data().data();
  float* cp = c.data().data();
  const std::size_t n = b.rows(), k = a.cols();
  detail::for_row_ranges(a.rows(), cfg.threads, 8, [&](std::size_t lo, std::size_t hi) {
    detail::nt_rows(ap, bp, cp, n, k, lo, hi);
  });
  return c;
}

/// Out-of-place transpose. Throws MemoryExhausted if the result cannot be allocated.
inline Matrix transpose_oop(const Matrix& b, const KernelConfig& cfg = {}) {
  auto scratch = detail::allocate_scratch(b.size(), cfg);
  detail::transpose(b.data().data(), scratch.get(), b.rows(), b.cols(), cfg);
  return Matrix(b.cols(), b.rows(), std::vector<float>(scratch.get(), scratch.get() + b.size()));
}

/// C = A x B^T computed as transpose-then-NN. The B^T buffer lives only for
/// the duration of the call.
inline Matrix gemm_tnn(const Matrix& a, const Matrix& b, const KernelConfig& cfg = {},
                       TnnPhases* phases = nullptr) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("gemm_tnn: A is " + detail::dims(a) + " but B is " +
                            detail::dims(b) + " (A.cols must equal B.cols)");
  }
  using clock = std::chrono::steady_clock;
  const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
  Matrix c(m, n);

  const auto t0 = clock::now();
  auto bt = detail::allocate_scratch(n * k, cfg);
  const auto t1 = clock::now();
  detail::transpose(b.data().data(), bt.get(), n, k, cfg);
  const auto t2 = clock::now();
  detail::nn(a.data().data(), bt.get(), c.data().data(), m, n, k, cfg);
  const auto t3 = clock::now();
  bt.reset();
  const auto t4 = clock::now();

  if (phases != nullptr) {
    using sec = std::chrono::duration<double>;
    phases->allocate = sec(t1 - t0).count();
    phases->transpose = sec(t2 - t1).count();
    phases->multiply = sec(t3 - t2).count();
    phases->release = sec(t4 - t3).count();
  }
  return c;
}

}  // namespace mtnn
