// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "pvl/numerics/tensor.hpp"

// Differentiable primitives. Unless noted otherwise, a tensor is viewed as a
// rows() x cols() matrix; "row-wise" ops act along the last dimension.
namespace pvl {

inline constexpr double kKlEpsilon = 1e-8;
inline constexpr double kNormEpsilon = 1e-12;
inline constexpr double kLayerNormEpsilon = 1e-6;

// Linear algebra.
Tensor matmul(const Tensor &a, const Tensor &b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor &a, const Tensor &b);
Tensor transpose(const Tensor &a);

// Element-wise, identical shapes.
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor div(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double factor);
Tensor add_scalar(const Tensor &a, double value);
Tensor log(const Tensor &a);
Tensor exp(const Tensor &a);
Tensor square(const Tensor &a);
Tensor gelu(const Tensor &a);

inline Tensor operator+(const Tensor &a, const Tensor &b) { return add(a, b); }
inline Tensor operator-(const Tensor &a, const Tensor &b) { return sub(a, b); }
inline Tensor operator*(const Tensor &a, const Tensor &b) { return mul(a, b); }
inline Tensor operator*(const Tensor &a, double f) { return scale(a, f); }
inline Tensor operator*(double f, const Tensor &a) { return scale(a, f); }

// Broadcast a length-cols() vector over every row.
Tensor add_rowvec(const Tensor &a, const Tensor &v);
Tensor mul_rowvec(const Tensor &a, const Tensor &v);

/// x * w + b for x [m x in], w [in x out], b [out].
Tensor linear(const Tensor &x, const Tensor &w, const Tensor &b);

// Reductions.
Tensor sum(const Tensor &a);
Tensor mean(const Tensor &a);
/// Mean over rows: [m x n] -> [n].
Tensor mean_rows(const Tensor &a);
/// Averages same-shaped tensors.
Tensor average(const std::vector<Tensor> &items);

// Normalizations and distributions.
/// Softmax along `axis` of a rank-1 or rank-2 tensor (-1 = last axis).
Tensor softmax(const Tensor &a, int axis = -1);
Tensor log_softmax(const Tensor &a);
/// Row-wise standardization, no affine transform.
Tensor layer_norm(const Tensor &a, double eps = kLayerNormEpsilon);
Tensor layer_norm(const Tensor &a, const Tensor &gamma, const Tensor &beta,
                  double eps = kLayerNormEpsilon);
/// Row-wise x / max(||x||, eps).
Tensor l2_normalize(const Tensor &a, double eps = kNormEpsilon);

// Losses returning shape [1].
/// -log softmax(logits)[label] for a single logit vector.
Tensor cross_entropy(const Tensor &logits, std::size_t label);
/// sum p_i ln(p_i / max(q_i, eps)), with 0 ln 0 := 0.
Tensor kl_divergence(const Tensor &p, const Tensor &q,
                     double eps = kKlEpsilon);

// Structural.
Tensor reshape(const Tensor &a, Shape shape);
Tensor slice_rows(const Tensor &a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor &a, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor> &parts);
Tensor concat_cols(const std::vector<Tensor> &parts);
/// Row `index` as a rank-1 tensor.
Tensor row(const Tensor &a, std::size_t index);

} // namespace pvl
