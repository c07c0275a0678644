// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

// Raw row-major GEMM kernels used by the tensor ops.
//
// Every kernel has a serial reference and an OpenMP variant. The parallel
// variants split work over output rows only, so each output element is
// accumulated in the same order as the serial path and results agree
// bit-for-bit regardless of thread count.
namespace pvl::kernels {

/// c[m x n] (+)= a[m x k] * b[k x n]
void gemm_serial(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate = false);
void gemm_parallel(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate = false);

/// c[m x n] (+)= a[m x k] * b^T, with b stored as [n x k]
void gemm_nt_serial(std::span<const double> a, std::span<const double> b,
                    std::span<double> c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate = false);
void gemm_nt_parallel(std::span<const double> a, std::span<const double> b,
                      std::span<double> c, std::size_t m, std::size_t k,
                      std::size_t n, bool accumulate = false);

/// c[m x n] (+)= a^T * b, with a stored as [k x m] and b as [k x n]
void gemm_tn_serial(std::span<const double> a, std::span<const double> b,
                    std::span<double> c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate = false);
void gemm_tn_parallel(std::span<const double> a, std::span<const double> b,
                      std::span<double> c, std::size_t m, std::size_t k,
                      std::size_t n, bool accumulate = false);

/// Dispatching entry points: parallel above the work threshold, serial below.
void gemm(std::span<const double> a, std::span<const double> b,
          std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate = false);
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate = false);
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate = false);

/// Multiply-add count above which gemm() uses the parallel kernel.
std::size_t parallel_threshold();
void set_parallel_threshold(std::size_t flops);

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();
void set_num_threads(int n);

} // namespace pvl::kernels
