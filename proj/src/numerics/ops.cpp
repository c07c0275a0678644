// SPDX-License-Identifier: Apache-2.0
#include "pvl/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/kernels.hpp"

namespace pvl {

using detail::make_result;
using detail::Node;

namespace {

void require_same_shape(const Tensor &a, const Tensor &b, const char *op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_finite(const Tensor &a, const char *op) {
  for (double v : a.data())
    if (!std::isfinite(v))
      throw NumericError(std::string(op) + ": non-finite input");
}

// Gradient accumulation target for parent i, or nullptr when it is not tracked.
double *grad_of(Node &out, std::size_t i) {
  auto &p = *out.parents[i];
  return p.requires_grad ? p.grad_buffer() : nullptr;
}

const std::vector<double> &data_of(Node &out, std::size_t i) {
  return out.parents[i]->data;
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor &a, Fwd fwd, Bwd dfdx) {
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [dfdx](Node &o) {
    double *ga = grad_of(o, 0);
    if (!ga)
      return;
    const auto &x = data_of(o, 0);
    for (std::size_t i = 0; i < x.size(); ++i)
      ga[i] += o.grad[i] * dfdx(x[i], o.data[i]);
  });
}

} // namespace

Tensor matmul(const Tensor &a, const Tensor &b) {
  if (b.rank() != 2 || a.rank() > 2 || a.cols() != b.shape()[0])
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) +
                         " by " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm(a.data(), b.data(), out, m, k, n);
  Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), {a, b},
                     [m, k, n](Node &o) {
                       if (double *ga = grad_of(o, 0))
                         kernels::gemm_nt(o.grad, data_of(o, 1),
                                          {ga, m * k}, m, n, k, true);
                       if (double *gb = grad_of(o, 1))
                         kernels::gemm_tn(data_of(o, 0), o.grad,
                                          {gb, k * n}, k, m, n, true);
                     });
}

Tensor matmul_nt(const Tensor &a, const Tensor &b) {
  if (b.rank() != 2 || a.rank() > 2 || a.cols() != b.cols())
    throw DimensionError("matmul_nt: cannot multiply " + shape_str(a.shape()) +
                         " by transpose of " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n);
  kernels::gemm_nt(a.data(), b.data(), out, m, k, n);
  Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), {a, b},
                     [m, k, n](Node &o) {
                       if (double *ga = grad_of(o, 0))
                         kernels::gemm(o.grad, data_of(o, 1), {ga, m * k}, m,
                                       n, k, true);
                       if (double *gb = grad_of(o, 1))
                         kernels::gemm_tn(o.grad, data_of(o, 0), {gb, n * k},
                                          n, m, k, true);
                     });
}

Tensor transpose(const Tensor &a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: expected rank 2, got " +
                         shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[j * m + i] = in[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node &o) {
    if (double *ga = grad_of(o, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          ga[i * n + j] += o.grad[j * m + i];
  });
}

Tensor add(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &o) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double *g = grad_of(o, p))
        for (std::size_t i = 0; i < o.grad.size(); ++i)
          g[i] += o.grad[i];
  });
}

Tensor sub(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &o) {
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] += o.grad[i];
    if (double *g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] -= o.grad[i];
  });
}

Tensor mul(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &o) {
    const auto &x = data_of(o, 0);
    const auto &y = data_of(o, 1);
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] += o.grad[i] * y[i];
    if (double *g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] += o.grad[i] * x[i];
  });
}

Tensor div(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "div");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x[i] / y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &o) {
    const auto &y = data_of(o, 1);
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] += o.grad[i] / y[i];
    if (double *g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] -= o.grad[i] * o.data[i] / y[i];
  });
}

Tensor scale(const Tensor &a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor &a, double value) {
  return unary(
      a, [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Tensor log(const Tensor &a) {
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor &a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor square(const Tensor &a) {
  return unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor gelu(const Tensor &a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [inv_sqrt_2pi](double x, double) {
        return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) +
               x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
      });
}

Tensor add_rowvec(const Tensor &a, const Tensor &v) {
  if (v.numel() != a.cols())
    throw DimensionError("add_rowvec: vector " + shape_str(v.shape()) +
                         " does not match rows of " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  auto x = a.data(), y = v.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = x[i * n + j] + y[j];
  return make_result(a.shape(), std::move(out), {a, v}, [m, n](Node &o) {
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < m * n; ++i)
        g[i] += o.grad[i];
    if (double *g = grad_of(o, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[j] += o.grad[i * n + j];
  });
}

Tensor mul_rowvec(const Tensor &a, const Tensor &v) {
  if (v.numel() != a.cols())
    throw DimensionError("mul_rowvec: vector " + shape_str(v.shape()) +
                         " does not match rows of " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  auto x = a.data(), y = v.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = x[i * n + j] * y[j];
  return make_result(a.shape(), std::move(out), {a, v}, [m, n](Node &o) {
    const auto &x = data_of(o, 0);
    const auto &y = data_of(o, 1);
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[i * n + j] += o.grad[i * n + j] * y[j];
    if (double *g = grad_of(o, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[j] += o.grad[i * n + j] * x[i * n + j];
  });
}

Tensor linear(const Tensor &x, const Tensor &w, const Tensor &b) {
  return add_rowvec(matmul(x, w), b);
}

Tensor sum(const Tensor &a) {
  double s = 0.0;
  for (double v : a.data())
    s += v;
  return make_result({1}, {s}, {a}, [](Node &o) {
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.parents[0]->data.size(); ++i)
        g[i] += o.grad[0];
  });
}

Tensor mean(const Tensor &a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_rows(const Tensor &a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[j] += x[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  for (auto &v : out)
    v *= inv;
  return make_result({n}, std::move(out), {a}, [m, n, inv](Node &o) {
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[i * n + j] += o.grad[j] * inv;
  });
}

Tensor average(const std::vector<Tensor> &items) {
  if (items.empty())
    throw DimensionError("average: no inputs");
  Tensor acc = items.front();
  for (std::size_t i = 1; i < items.size(); ++i)
    acc = add(acc, items[i]);
  return scale(acc, 1.0 / static_cast<double>(items.size()));
}

Tensor softmax(const Tensor &a, int axis) {
  require_finite(a, "softmax");
  if (a.rank() > 2)
    throw DimensionError("softmax: rank > 2 not supported, got " +
                         shape_str(a.shape()));
  const int last = static_cast<int>(a.rank()) - 1;
  if (axis < 0)
    axis += static_cast<int>(a.rank());
  if (axis < 0 || axis > last)
    throw DimensionError("softmax: axis out of range for " +
                         shape_str(a.shape()));
  const std::size_t rows = a.rows(), cols = a.cols();
  // (outer, len, stride) walks each slice along `axis`.
  const bool along_cols = axis == last;
  const std::size_t outer = along_cols ? rows : cols;
  const std::size_t len = along_cols ? cols : rows;
  const std::size_t stride = along_cols ? 1 : cols;
  const std::size_t step = along_cols ? cols : 1;

  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * step;
    double mx = x[base];
    for (std::size_t i = 1; i < len; ++i)
      mx = std::max(mx, x[base + i * stride]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      double e = std::exp(x[base + i * stride] - mx);
      out[base + i * stride] = e;
      s += e;
    }
    for (std::size_t i = 0; i < len; ++i)
      out[base + i * stride] /= s;
  }
  return make_result(a.shape(), std::move(out), {a},
                     [outer, len, stride, step](Node &o) {
                       double *g = grad_of(o, 0);
                       if (!g)
                         return;
                       for (std::size_t r = 0; r < outer; ++r) {
                         const std::size_t base = r * step;
                         double dot = 0.0;
                         for (std::size_t i = 0; i < len; ++i)
                           dot += o.grad[base + i * stride] *
                                  o.data[base + i * stride];
                         for (std::size_t i = 0; i < len; ++i) {
                           const std::size_t idx = base + i * stride;
                           g[idx] += o.data[idx] * (o.grad[idx] - dot);
                         }
                       }
                     });
}

Tensor log_softmax(const Tensor &a) {
  require_finite(a, "log_softmax");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double *xr = x.data() + r * n;
    double mx = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      s += std::exp(xr[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = xr[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a}, [m, n](Node &o) {
    double *g = grad_of(o, 0);
    if (!g)
      return;
    for (std::size_t r = 0; r < m; ++r) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        gs += o.grad[r * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[r * n + j] += o.grad[r * n + j] - std::exp(o.data[r * n + j]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor &a, double eps) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  std::vector<double> inv_std(m);
  auto x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double *xr = x.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = (xr[j] - mu) * inv_std[r];
  }
  return make_result(
      a.shape(), std::move(out), {a},
      [m, n, inv_std = std::move(inv_std)](Node &o) {
        double *g = grad_of(o, 0);
        if (!g)
          return;
        const double dn = static_cast<double>(n);
        for (std::size_t r = 0; r < m; ++r) {
          const double *dy = o.grad.data() + r * n;
          const double *y = o.data.data() + r * n;
          double mean_dy = 0.0, mean_dy_y = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            mean_dy += dy[j];
            mean_dy_y += dy[j] * y[j];
          }
          mean_dy /= dn;
          mean_dy_y /= dn;
          for (std::size_t j = 0; j < n; ++j)
            g[r * n + j] += inv_std[r] * (dy[j] - mean_dy - y[j] * mean_dy_y);
        }
      });
}

Tensor layer_norm(const Tensor &a, const Tensor &gamma, const Tensor &beta,
                  double eps) {
  return add_rowvec(mul_rowvec(layer_norm(a, eps), gamma), beta);
}

Tensor l2_normalize(const Tensor &a, double eps) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  std::vector<double> norms(m);
  auto x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      s += x[r * n + j] * x[r * n + j];
    norms[r] = std::sqrt(s);
    const double d = std::max(norms[r], eps);
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = x[r * n + j] / d;
  }
  return make_result(
      a.shape(), std::move(out), {a},
      [m, n, eps, norms = std::move(norms)](Node &o) {
        double *g = grad_of(o, 0);
        if (!g)
          return;
        for (std::size_t r = 0; r < m; ++r) {
          const double *dy = o.grad.data() + r * n;
          const double *y = o.data.data() + r * n;
          if (norms[r] > eps) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j)
              dot += dy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j)
              g[r * n + j] += (dy[j] - y[j] * dot) / norms[r];
          } else {
            for (std::size_t j = 0; j < n; ++j)
              g[r * n + j] += dy[j] / eps;
          }
        }
      });
}

Tensor cross_entropy(const Tensor &logits, std::size_t label) {
  if (label >= logits.numel())
    throw IndexError("cross_entropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(logits.numel()) +
                     " logits");
  require_finite(logits, "cross_entropy");
  auto x = logits.data();
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x)
    s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  return make_result({1}, {lse - x[label]}, {logits}, [label, lse](Node &o) {
    double *g = grad_of(o, 0);
    if (!g)
      return;
    const auto &x = data_of(o, 0);
    for (std::size_t i = 0; i < x.size(); ++i)
      g[i] += o.grad[0] * (std::exp(x[i] - lse) - (i == label ? 1.0 : 0.0));
  });
}

Tensor kl_divergence(const Tensor &p, const Tensor &q, double eps) {
  if (p.numel() != q.numel())
    throw DimensionError("kl_divergence: length mismatch " +
                         shape_str(p.shape()) + " vs " + shape_str(q.shape()));
  auto pv = p.data(), qv = q.data();
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i)
    if (pv[i] > 0.0)
      s += pv[i] * (std::log(pv[i]) - std::log(std::max(qv[i], eps)));
  return make_result({1}, {s}, {p, q}, [eps](Node &o) {
    const auto &pv = data_of(o, 0);
    const auto &qv = data_of(o, 1);
    const double g0 = o.grad[0];
    if (double *gp = grad_of(o, 0))
      for (std::size_t i = 0; i < pv.size(); ++i)
        if (pv[i] > 0.0)
          gp[i] += g0 * (std::log(pv[i]) + 1.0 - std::log(std::max(qv[i], eps)));
    if (double *gq = grad_of(o, 1))
      for (std::size_t i = 0; i < pv.size(); ++i)
        if (qv[i] > eps)
          gq[i] -= g0 * pv[i] / qv[i];
  });
}

Tensor reshape(const Tensor &a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node &o) {
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        g[i] += o.grad[i];
  });
}

Tensor slice_rows(const Tensor &a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.rows())
    throw IndexError("slice_rows: [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") outside " + shape_str(a.shape()));
  const std::size_t n = a.cols();
  auto x = a.data();
  std::vector<double> out(x.begin() + begin * n, x.begin() + end * n);
  return make_result({end - begin, n}, std::move(out), {a},
                     [begin, n](Node &o) {
                       if (double *g = grad_of(o, 0))
                         for (std::size_t i = 0; i < o.grad.size(); ++i)
                           g[begin * n + i] += o.grad[i];
                     });
}

Tensor slice_cols(const Tensor &a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols())
    throw IndexError("slice_cols: [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") outside " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  auto x = a.data();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.begin() + i * n + begin, w, out.begin() + i * w);
  return make_result({m, w}, std::move(out), {a}, [m, n, w, begin](Node &o) {
    if (double *g = grad_of(o, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j)
          g[i * n + begin + j] += o.grad[i * w + j];
  });
}

Tensor concat_rows(const std::vector<Tensor> &parts) {
  if (parts.empty())
    throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto &p : parts) {
    if (p.cols() != n)
      throw DimensionError("concat_rows: column mismatch " +
                           shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto &p : parts)
    out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({m, n}, std::move(out), parts, [](Node &o) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < o.parents.size(); ++p) {
      const std::size_t len = o.parents[p]->data.size();
      if (double *g = grad_of(o, p))
        for (std::size_t i = 0; i < len; ++i)
          g[i] += o.grad[offset + i];
      offset += len;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor> &parts) {
  if (parts.empty())
    throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  std::vector<std::size_t> widths;
  for (const auto &p : parts) {
    if (p.rows() != m)
      throw DimensionError("concat_cols: row mismatch " +
                           shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto x = parts[p].data();
    const std::size_t w = widths[p];
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(x.begin() + i * w, w, out.begin() + i * n + col);
    col += w;
  }
  return make_result({m, n}, std::move(out), parts,
                     [m, n, widths = std::move(widths)](Node &o) {
                       std::size_t col = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         const std::size_t w = widths[p];
                         if (double *g = grad_of(o, p))
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j)
                               g[i * w + j] += o.grad[i * n + col + j];
                         col += w;
                       }
                     });
}

Tensor row(const Tensor &a, std::size_t index) {
  return reshape(slice_rows(a, index, index + 1), {a.cols()});
}

} // namespace pvl
