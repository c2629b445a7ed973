// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense tensor plus the gemm kernels everything runs on. Rows of
// every output are computed start-to-finish by a single thread, so results
// are bitwise reproducible for any thread count.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "bfmd/errors.hpp"

namespace bfmd::nn {

using Shape = std::vector<long>;

template <class S>
struct Tens {
  Shape shape;
  std::vector<S> data;

  Tens() = default;
  explicit Tens(Shape shp) : shape(std::move(shp)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), S(0));
  }
  Tens(Shape shp, std::vector<S> values) : shape(std::move(shp)), data(std::move(values)) {
    if (static_cast<long>(data.size()) != numel_of(shape))
      throw ShapeMismatch("tensor data does not match shape");
  }

  static long numel_of(const Shape& s) {
    long n = 1;
    for (long d : s) n *= d;
    return n;
  }

  long numel() const { return static_cast<long>(data.size()); }
  long dim(int i) const {
    return shape[static_cast<std::size_t>(i < 0 ? static_cast<int>(shape.size()) + i : i)];
  }
  int rank() const { return static_cast<int>(shape.size()); }
  bool empty() const { return data.empty(); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  // Product of all dimensions except the last (row count when treated as a
  // matrix of [rows, last_dim]).
  long rows() const { return numel() / dim(-1); }
};

// Row ranges [row_begin, row_end) let callers parallelize over rows without
// nesting parallel regions; full-range overloads add the outer pragma.

template <class S>
void gemm_nn_rows(long row_begin, long row_end, long n, long k, const S* a,
                  const S* b, S* c, bool accumulate) {
  for (long i = row_begin; i < row_end; ++i) {
    S* ci = c + i * n;
    if (!accumulate) {
      for (long j = 0; j < n; ++j) ci[j] = S(0);
    }
    const S* ai = a + i * k;
    for (long kk = 0; kk < k; ++kk) {
      const S av = ai[kk];
      if (av == S(0)) continue;
      const S* bk = b + kk * n;
      for (long j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

template <class S>
void gemm_nt_rows(long row_begin, long row_end, long n, long k, const S* a,
                  const S* b, S* c, bool accumulate) {
  for (long i = row_begin; i < row_end; ++i) {
    const S* ai = a + i * k;
    S* ci = c + i * n;
    for (long j = 0; j < n; ++j) {
      const S* bj = b + j * k;
      S acc = S(0);
      for (long kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

template <class S>
void gemm_tn_rows(long row_begin, long row_end, long m, long n, long k,
                  const S* a, const S* b, S* c, bool accumulate) {
  for (long i = row_begin; i < row_end; ++i) {
    S* ci = c + i * n;
    if (!accumulate) {
      for (long j = 0; j < n; ++j) ci[j] = S(0);
    }
    for (long kk = 0; kk < k; ++kk) {
      const S av = a[kk * m + i];
      if (av == S(0)) continue;
      const S* bk = b + kk * n;
      for (long j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

inline constexpr long kGemmParallelWork = 1 << 16;

// C[M,N] (+)= A[M,K] * B[K,N]
template <class S>
void gemm_nn(long m, long n, long k, const S* a, const S* b, S* c,
             bool accumulate) {
  if (m * n * k > kGemmParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i) gemm_nn_rows(i, i + 1, n, k, a, b, c, accumulate);
  } else {
    gemm_nn_rows<S>(0, m, n, k, a, b, c, accumulate);
  }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T
template <class S>
void gemm_nt(long m, long n, long k, const S* a, const S* b, S* c,
             bool accumulate) {
  if (m * n * k > kGemmParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i) gemm_nt_rows(i, i + 1, n, k, a, b, c, accumulate);
  } else {
    gemm_nt_rows<S>(0, m, n, k, a, b, c, accumulate);
  }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
template <class S>
void gemm_tn(long m, long n, long k, const S* a, const S* b, S* c,
             bool accumulate) {
  if (m * n * k > kGemmParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i)
      gemm_tn_rows(i, i + 1, m, n, k, a, b, c, accumulate);
  } else {
    gemm_tn_rows<S>(0, m, m, n, k, a, b, c, accumulate);
  }
}

}  // namespace bfmd::nn
