// SPDX-License-Identifier: Apache-2.0
#include "pvl/numerics/kernels.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pvl::kernels {

namespace {

std::atomic<std::size_t> g_threshold{1u << 18};

// Row-range bodies shared by the serial and parallel drivers.
inline void gemm_rows(const double *a, const double *b, double *c,
                      std::size_t r0, std::size_t r1, std::size_t k,
                      std::size_t n, bool accumulate) {
  for (std::size_t i = r0; i < r1; ++i) {
    double *ci = c + i * n;
    if (!accumulate)
      std::fill(ci, ci + n, 0.0);
    const double *ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double *bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j)
        ci[j] += aip * bp[j];
    }
  }
}

inline void gemm_nt_rows(const double *a, const double *b, double *c,
                         std::size_t r0, std::size_t r1, std::size_t k,
                         std::size_t n, bool accumulate) {
  for (std::size_t i = r0; i < r1; ++i) {
    const double *ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double *bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        s += ai[p] * bj[p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

// Rows of the output are columns of a; walk a row-by-row of k.
inline void gemm_tn_rows(const double *a, const double *b, double *c,
                         std::size_t r0, std::size_t r1, std::size_t m,
                         std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate)
    std::fill(c + r0 * n, c + r1 * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double *ap = a + p * m;
    const double *bp = b + p * n;
    for (std::size_t i = r0; i < r1; ++i) {
      const double api = ap[i];
      double *ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j)
        ci[j] += api * bp[j];
    }
  }
}

} // namespace

void gemm_serial(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate) {
  gemm_rows(a.data(), b.data(), c.data(), 0, m, k, n, accumulate);
}

void gemm_parallel(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i)
    gemm_rows(a.data(), b.data(), c.data(), static_cast<std::size_t>(i),
              static_cast<std::size_t>(i) + 1, k, n, accumulate);
}

void gemm_nt_serial(std::span<const double> a, std::span<const double> b,
                    std::span<double> c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
  gemm_nt_rows(a.data(), b.data(), c.data(), 0, m, k, n, accumulate);
}

void gemm_nt_parallel(std::span<const double> a, std::span<const double> b,
                      std::span<double> c, std::size_t m, std::size_t k,
                      std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i)
    gemm_nt_rows(a.data(), b.data(), c.data(), static_cast<std::size_t>(i),
                 static_cast<std::size_t>(i) + 1, k, n, accumulate);
}

void gemm_tn_serial(std::span<const double> a, std::span<const double> b,
                    std::span<double> c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
  gemm_tn_rows(a.data(), b.data(), c.data(), 0, m, m, k, n, accumulate);
}

void gemm_tn_parallel(std::span<const double> a, std::span<const double> b,
                      std::span<double> c, std::size_t m, std::size_t k,
                      std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i)
    gemm_tn_rows(a.data(), b.data(), c.data(), static_cast<std::size_t>(i),
                 static_cast<std::size_t>(i) + 1, m, k, n, accumulate);
}

static bool use_parallel(std::size_t m, std::size_t k, std::size_t n) {
  return m > 1 && m * k * n >= g_threshold.load(std::memory_order_relaxed) &&
         max_threads() > 1;
}

void gemm(std::span<const double> a, std::span<const double> b,
          std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  if (use_parallel(m, k, n))
    gemm_parallel(a, b, c, m, k, n, accumulate);
  else
    gemm_serial(a, b, c, m, k, n, accumulate);
}

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (use_parallel(m, k, n))
    gemm_nt_parallel(a, b, c, m, k, n, accumulate);
  else
    gemm_nt_serial(a, b, c, m, k, n, accumulate);
}

void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (use_parallel(m, k, n))
    gemm_tn_parallel(a, b, c, m, k, n, accumulate);
  else
    gemm_tn_serial(a, b, c, m, k, n, accumulate);
}

std::size_t parallel_threshold() { return g_threshold.load(); }
void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0)
    omp_set_num_threads(n);
#else
  (void)n;
#endif
}

} // namespace pvl::kernels
