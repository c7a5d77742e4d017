// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/core/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace mcdk::ops {
namespace {

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatrixMap = Eigen::Map<RowMatrix<S>>;
template <typename S>
using ConstMatrixMap = Eigen::Map<const RowMatrix<S>>;

template <typename S>
bool needs_grad(std::initializer_list<const Tensor<S>*> inputs) {
  if (Graph<S>::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename S>
void record(const char* op, std::vector<Tensor<S>> inputs, Tensor<S>& out,
            std::function<void(typename Graph<S>::Node&)> backward) {
  out.set_requires_grad(true);
  Graph<S>::active()->record(op, std::move(inputs), out, std::move(backward));
}

[[noreturn]] void dim_error(const char* op, const std::string& what) {
  throw DimensionError(std::string(op) + ": " + what);
}

void require_rank(const char* op, const char* name, const Shape& shape, int rank) {
  if (static_cast<int>(shape.size()) != rank) {
    dim_error(op, std::string(name) + " must have rank " + std::to_string(rank) +
                      ", got " + shape_string(shape));
  }
}

int normalize_axis(const char* op, int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    dim_error(op, "axis " + std::to_string(axis) + " out of range for rank " +
                      std::to_string(rank));
  }
  return a;
}

// im2col for one image and one channel group: rows are (c, ky, kx),
// columns are output positions.
template <typename S>
void im2col(const S* x, Index channels, Index height, Index width, Index kh,
            Index kw, const Conv2dOptions& o, Index out_h, Index out_w, S* col) {
  const Index positions = out_h * out_w;
  for (Index c = 0; c < channels; ++c) {
    const S* plane = x + c * height * width;
    for (Index ky = 0; ky < kh; ++ky) {
      for (Index kx = 0; kx < kw; ++kx) {
        S* row = col + ((c * kh + ky) * kw + kx) * positions;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * o.stride - o.pad_h + ky;
          S* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, S(0));
            continue;
          }
          const S* src = plane + iy * width;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * o.stride - o.pad_w + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im(const S* col, Index channels, Index height, Index width, Index kh,
            Index kw, const Conv2dOptions& o, Index out_h, Index out_w, S* x) {
  const Index positions = out_h * out_w;
  for (Index c = 0; c < channels; ++c) {
    S* plane = x + c * height * width;
    for (Index ky = 0; ky < kh; ++ky) {
      for (Index kx = 0; kx < kw; ++kx) {
        const S* row = col + ((c * kh + ky) * kw + kx) * positions;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * o.stride - o.pad_h + ky;
          if (iy < 0 || iy >= height) continue;
          S* dst = plane + iy * width;
          const S* src = row + oy * out_w;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * o.stride - o.pad_w + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct BroadcastPlan {
  Shape out_shape;
  std::array<Index, 4> extent{1, 1, 1, 1};
  std::array<Index, 4> stride_a{0, 0, 0, 0};
  std::array<Index, 4> stride_b{0, 0, 0, 0};
  bool same = false;
};

std::array<Index, 4> padded_strides(const Shape& shape, const Shape& out) {
  std::array<Index, 4> strides{0, 0, 0, 0};
  const int offset = 4 - static_cast<int>(shape.size());
  Index running = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    strides[static_cast<std::size_t>(i + offset)] =
        (shape[static_cast<std::size_t>(i)] == 1 && out[static_cast<std::size_t>(i)] != 1)
            ? 0
            : running;
    running *= shape[static_cast<std::size_t>(i)];
  }
  return strides;
}

BroadcastPlan plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    dim_error(op, "rank mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
  BroadcastPlan plan;
  plan.same = (a == b);
  plan.out_shape.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      plan.out_shape[i] = a[i];
    } else if (a[i] == 1) {
      plan.out_shape[i] = b[i];
    } else {
      dim_error(op, "axis " + std::to_string(i) + " not broadcastable: " +
                        shape_string(a) + " vs " + shape_string(b));
    }
  }
  const int offset = 4 - static_cast<int>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    plan.extent[i + static_cast<std::size_t>(offset)] = plan.out_shape[i];
  }
  plan.stride_a = padded_strides(a, plan.out_shape);
  plan.stride_b = padded_strides(b, plan.out_shape);
  return plan;
}

template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  Index o = 0;
  for (Index i0 = 0; i0 < p.extent[0]; ++i0) {
    for (Index i1 = 0; i1 < p.extent[1]; ++i1) {
      for (Index i2 = 0; i2 < p.extent[2]; ++i2) {
        const Index base_a = i0 * p.stride_a[0] + i1 * p.stride_a[1] + i2 * p.stride_a[2];
        const Index base_b = i0 * p.stride_b[0] + i1 * p.stride_b[1] + i2 * p.stride_b[2];
        for (Index i3 = 0; i3 < p.extent[3]; ++i3, ++o) {
          f(o, base_a + i3 * p.stride_a[3], base_b + i3 * p.stride_b[3]);
        }
      }
    }
  }
}

template <typename S>
S sigmoid_value(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// Strides of a row-major shape.
Shape row_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * shape[static_cast<std::size_t>(i + 1)];
  }
  return strides;
}

}  // namespace

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias,
                 const Conv2dOptions& o) {
  constexpr const char* op = "conv2d";
  require_rank(op, "input", x.shape(), 4);
  require_rank(op, "weight", weight.shape(), 4);
  const Index batch = x.dim(0), cin = x.dim(1), height = x.dim(2), width = x.dim(3);
  const Index cout = weight.dim(0), cin_g = weight.dim(1), kh = weight.dim(2),
              kw = weight.dim(3);
  if (o.groups < 1 || cin % o.groups != 0 || cout % o.groups != 0) {
    dim_error(op, "channel axis: input channels " + std::to_string(cin) +
                      " and output channels " + std::to_string(cout) +
                      " must be divisible by groups " + std::to_string(o.groups));
  }
  if (cin / o.groups != cin_g) {
    dim_error(op, "channel axis: weight expects " + std::to_string(cin_g) +
                      " channels per group, input provides " +
                      std::to_string(cin / o.groups));
  }
  if (kh % 2 == 0 || kw % 2 == 0) dim_error(op, "kernel extents must be odd");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    dim_error(op, "bias must have shape [" + std::to_string(cout) + "], got " +
                      shape_string(bias.shape()));
  }
  if (o.stride < 1) dim_error(op, "stride must be positive");
  const Index out_h = (height + 2 * o.pad_h - kh) / o.stride + 1;
  const Index out_w = (width + 2 * o.pad_w - kw) / o.stride + 1;
  if (out_h <= 0 || out_w <= 0) {
    dim_error(op, "spatial axes too small for kernel: input " + shape_string(x.shape()));
  }
  const Index cout_g = cout / o.groups;
  const Index col_rows = cin_g * kh * kw;
  const Index positions = out_h * out_w;
  const bool direct = (kh == 1 && kw == 1 && o.stride == 1 && o.pad_h == 0 && o.pad_w == 0);

  Tensor<S> out(Shape{batch, cout, out_h, out_w});
  AlignedVector<S> col(direct ? 0 : static_cast<std::size_t>(col_rows * positions));
  for (Index b = 0; b < batch; ++b) {
    for (Index g = 0; g < o.groups; ++g) {
      const S* xg = x.ptr() + (b * cin + g * cin_g) * height * width;
      const S* col_ptr = xg;
      if (!direct) {
        im2col(xg, cin_g, height, width, kh, kw, o, out_h, out_w, col.data());
        col_ptr = col.data();
      }
      ConstMatrixMap<S> cols(col_ptr, col_rows, positions);
      ConstMatrixMap<S> w(weight.ptr() + g * cout_g * col_rows, cout_g, col_rows);
      MatrixMap<S> y(out.mutable_ptr() + (b * cout + g * cout_g) * positions, cout_g,
                     positions);
      y.noalias() = w * cols;
      if (bias.defined()) {
        for (Index c = 0; c < cout_g; ++c) y.row(c).array() += bias[g * cout_g + c];
      }
    }
  }

  if (needs_grad<S>({&x, &weight, &bias})) {
    record<S>(op, {x, weight, bias}, out,
              [=](typename Graph<S>::Node& node) mutable {
                Tensor<S>& in = node.inputs[0];
                Tensor<S>& wt = node.inputs[1];
                Tensor<S>& bs = node.inputs[2];
                const S* gout = node.output.grad().data();
                AlignedVector<S> cbuf(static_cast<std::size_t>(col_rows * positions));
                for (Index b = 0; b < batch; ++b) {
                  for (Index g = 0; g < o.groups; ++g) {
                    ConstMatrixMap<S> gy(gout + (b * cout + g * cout_g) * positions,
                                         cout_g, positions);
                    const S* xg = in.ptr() + (b * cin + g * cin_g) * height * width;
                    if (wt.requires_grad()) {
                      const S* col_ptr = xg;
                      if (!direct) {
                        im2col(xg, cin_g, height, width, kh, kw, o, out_h, out_w,
                               cbuf.data());
                        col_ptr = cbuf.data();
                      }
                      ConstMatrixMap<S> cols(col_ptr, col_rows, positions);
                      MatrixMap<S> gw(wt.grad_buffer().data() + g * cout_g * col_rows,
                                      cout_g, col_rows);
                      gw.noalias() += gy * cols.transpose();
                    }
                    if (in.requires_grad()) {
                      ConstMatrixMap<S> w(wt.ptr() + g * cout_g * col_rows, cout_g,
                                          col_rows);
                      S* gx = in.grad_buffer().data() + (b * cin + g * cin_g) * height * width;
                      if (direct) {
                        MatrixMap<S> gxm(gx, col_rows, positions);
                        gxm.noalias() += w.transpose() * gy;
                      } else {
                        MatrixMap<S> gcol(cbuf.data(), col_rows, positions);
                        gcol.noalias() = w.transpose() * gy;
                        col2im(cbuf.data(), cin_g, height, width, kh, kw, o, out_h,
                               out_w, gx);
                      }
                    }
                    if (bs.defined() && bs.requires_grad()) {
                      auto gb = bs.grad_buffer();
                      for (Index c = 0; c < cout_g; ++c) gb[static_cast<std::size_t>(g * cout_g + c)] += gy.row(c).sum();
                    }
                  }
                }
              });
  }
  return out;
}

template <typename S>
Tensor<S> elementwise(const Tensor<S>& x, UnaryFn fn) {
  Tensor<S> out(x.shape());
  const S* in = x.ptr();
  S* y = out.mutable_ptr();
  const Index n = x.size();
  switch (fn) {
    case UnaryFn::relu:
      for (Index i = 0; i < n; ++i) y[i] = in[i] <= S(0) ? S(0) : in[i];
      break;
    case UnaryFn::sigmoid:
      for (Index i = 0; i < n; ++i) y[i] = sigmoid_value(in[i]);
      break;
    case UnaryFn::tanh:
      for (Index i = 0; i < n; ++i) y[i] = std::tanh(in[i]);
      break;
    case UnaryFn::abs:
      for (Index i = 0; i < n; ++i) y[i] = std::abs(in[i]);
      break;
    case UnaryFn::square:
      for (Index i = 0; i < n; ++i) y[i] = in[i] * in[i];
      break;
    case UnaryFn::log1p:
      for (Index i = 0; i < n; ++i) y[i] = std::log1p(in[i]);
      break;
  }
  if (needs_grad<S>({&x})) {
    record<S>("elementwise", {x}, out, [fn, n](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      const S* yv = node.output.ptr();
      const S* xv = node.inputs[0].ptr();
      S* gx = node.inputs[0].grad_buffer().data();
      switch (fn) {
        case UnaryFn::relu:
          for (Index i = 0; i < n; ++i) gx[i] += xv[i] > S(0) ? g[i] : S(0);
          break;
        case UnaryFn::sigmoid:
          for (Index i = 0; i < n; ++i) gx[i] += g[i] * yv[i] * (S(1) - yv[i]);
          break;
        case UnaryFn::tanh:
          for (Index i = 0; i < n; ++i) gx[i] += g[i] * (S(1) - yv[i] * yv[i]);
          break;
        case UnaryFn::abs:
          for (Index i = 0; i < n; ++i)
            gx[i] += xv[i] > S(0) ? g[i] : (xv[i] < S(0) ? -g[i] : S(0));
          break;
        case UnaryFn::square:
          for (Index i = 0; i < n; ++i) gx[i] += S(2) * xv[i] * g[i];
          break;
        case UnaryFn::log1p:
          for (Index i = 0; i < n; ++i) gx[i] += g[i] / (S(1) + xv[i]);
          break;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> elementwise(const Tensor<S>& a, const Tensor<S>& b, BinaryFn fn) {
  const BroadcastPlan plan = plan_broadcast("elementwise", a.shape(), b.shape());
  Tensor<S> out(plan.out_shape);
  const S* av = a.ptr();
  const S* bv = b.ptr();
  S* y = out.mutable_ptr();
  auto apply = [fn](S u, S v) {
    switch (fn) {
      case BinaryFn::add: return u + v;
      case BinaryFn::sub: return u - v;
      case BinaryFn::mul: return u * v;
      case BinaryFn::div: return u / v;
    }
    return S(0);
  };
  if (plan.same) {
    const Index n = out.size();
    for (Index i = 0; i < n; ++i) y[i] = apply(av[i], bv[i]);
  } else {
    for_each_broadcast(plan, [&](Index o, Index ia, Index ib) { y[o] = apply(av[ia], bv[ib]); });
  }
  if (needs_grad<S>({&a, &b})) {
    record<S>("elementwise", {a, b}, out, [plan, fn](typename Graph<S>::Node& node) {
      Tensor<S>& ta = node.inputs[0];
      Tensor<S>& tb = node.inputs[1];
      const S* g = node.output.grad().data();
      const S* u = ta.ptr();
      const S* v = tb.ptr();
      S* ga = ta.requires_grad() ? ta.grad_buffer().data() : nullptr;
      S* gb = tb.requires_grad() ? tb.grad_buffer().data() : nullptr;
      auto step = [&](Index o, Index ia, Index ib) {
        switch (fn) {
          case BinaryFn::add:
            if (ga) ga[ia] += g[o];
            if (gb) gb[ib] += g[o];
            break;
          case BinaryFn::sub:
            if (ga) ga[ia] += g[o];
            if (gb) gb[ib] -= g[o];
            break;
          case BinaryFn::mul:
            if (ga) ga[ia] += g[o] * v[ib];
            if (gb) gb[ib] += g[o] * u[ia];
            break;
          case BinaryFn::div:
            if (ga) ga[ia] += g[o] / v[ib];
            if (gb) gb[ib] -= g[o] * u[ia] / (v[ib] * v[ib]);
            break;
        }
      };
      if (plan.same) {
        const Index n = node.output.size();
        for (Index i = 0; i < n; ++i) step(i, i, i);
      } else {
        for_each_broadcast(plan, step);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> affine(const Tensor<S>& x, S factor, S offset) {
  Tensor<S> out(x.shape());
  const Index n = x.size();
  for (Index i = 0; i < n; ++i) out[i] = x[i] * factor + offset;
  if (needs_grad<S>({&x})) {
    record<S>("affine", {x}, out, [factor, n](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index i = 0; i < n; ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
  const int a = normalize_axis("softmax", axis, x.rank());
  Index outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= x.dim(i);
  for (int i = a + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const Index n = x.dim(a);
  Tensor<S> out(x.shape());
  const S* in = x.ptr();
  S* y = out.mutable_ptr();
  for (Index o = 0; o < outer; ++o) {
    for (Index j = 0; j < inner; ++j) {
      const Index base = o * n * inner + j;
      S peak = in[base];
      for (Index k = 1; k < n; ++k) peak = std::max(peak, in[base + k * inner]);
      S total = 0;
      for (Index k = 0; k < n; ++k) {
        const S e = std::exp(in[base + k * inner] - peak);
        y[base + k * inner] = e;
        total += e;
      }
      const S inv = S(1) / total;
      for (Index k = 0; k < n; ++k) y[base + k * inner] *= inv;
    }
  }
  if (needs_grad<S>({&x})) {
    record<S>("softmax", {x}, out, [outer, inner, n](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      const S* yv = node.output.ptr();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index o = 0; o < outer; ++o) {
        for (Index j = 0; j < inner; ++j) {
          const Index base = o * n * inner + j;
          S dot = 0;
          for (Index k = 0; k < n; ++k) dot += g[base + k * inner] * yv[base + k * inner];
          for (Index k = 0; k < n; ++k) {
            const Index idx = base + k * inner;
            gx[idx] += yv[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  constexpr const char* op = "matmul";
  if (a.rank() < 2 || a.rank() != b.rank()) {
    dim_error(op, "operands need equal rank >= 2, got " + shape_string(a.shape()) +
                      " and " + shape_string(b.shape()));
  }
  const int r = a.rank();
  const Index m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  if (b.dim(-2) != k) {
    dim_error(op, "inner axis mismatch: " + std::to_string(k) + " vs " +
                      std::to_string(b.dim(-2)));
  }
  Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  Shape lead(lead_a.size());
  for (std::size_t i = 0; i < lead.size(); ++i) {
    if (lead_a[i] == lead_b[i] || lead_b[i] == 1) {
      lead[i] = lead_a[i];
    } else if (lead_a[i] == 1) {
      lead[i] = lead_b[i];
    } else {
      dim_error(op, "batch axis " + std::to_string(i) + " not broadcastable");
    }
  }
  // Map every output batch to its operand batches.
  const Index batches = lead.empty() ? 1 : shape_size(lead);
  std::vector<Index> index_a(static_cast<std::size_t>(batches)),
      index_b(static_cast<std::size_t>(batches));
  for (Index t = 0; t < batches; ++t) {
    Index rem = t, ia = 0, ib = 0, sa = 1, sb = 1;
    for (int i = static_cast<int>(lead.size()) - 1; i >= 0; --i) {
      const auto u = static_cast<std::size_t>(i);
      const Index coord = rem % lead[u];
      rem /= lead[u];
      ia += (lead_a[u] == 1 ? 0 : coord) * sa;
      ib += (lead_b[u] == 1 ? 0 : coord) * sb;
      sa *= lead_a[u];
      sb *= lead_b[u];
    }
    index_a[static_cast<std::size_t>(t)] = ia;
    index_b[static_cast<std::size_t>(t)] = ib;
  }
  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor<S> out(out_shape);
  for (Index t = 0; t < batches; ++t) {
    ConstMatrixMap<S> ma(a.ptr() + index_a[static_cast<std::size_t>(t)] * m * k, m, k);
    ConstMatrixMap<S> mb(b.ptr() + index_b[static_cast<std::size_t>(t)] * k * n, k, n);
    MatrixMap<S> my(out.mutable_ptr() + t * m * n, m, n);
    my.noalias() = ma * mb;
  }
  (void)r;
  if (needs_grad<S>({&a, &b})) {
    record<S>(op, {a, b}, out, [=](typename Graph<S>::Node& node) {
      Tensor<S>& ta = node.inputs[0];
      Tensor<S>& tb = node.inputs[1];
      const S* g = node.output.grad().data();
      for (Index t = 0; t < batches; ++t) {
        ConstMatrixMap<S> gy(g + t * m * n, m, n);
        const Index ia = index_a[static_cast<std::size_t>(t)];
        const Index ib = index_b[static_cast<std::size_t>(t)];
        if (ta.requires_grad()) {
          ConstMatrixMap<S> mb(tb.ptr() + ib * k * n, k, n);
          MatrixMap<S> ga(ta.grad_buffer().data() + ia * m * k, m, k);
          ga.noalias() += gy * mb.transpose();
        }
        if (tb.requires_grad()) {
          ConstMatrixMap<S> ma(ta.ptr() + ia * m * k, m, k);
          MatrixMap<S> gb(tb.grad_buffer().data() + ib * k * n, k, n);
          gb.noalias() += ma.transpose() * gy;
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> grid_sample_1d(const Tensor<S>& bank, const Tensor<S>& coords) {
  require_rank("grid_sample_1d", "bank", bank.shape(), 2);
  const Index q = bank.dim(0), d = bank.dim(1), n = coords.size();
  Tensor<S> out(Shape{n, d});
  std::vector<Index> lower(static_cast<std::size_t>(n));
  std::vector<S> frac(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) {
    const S c = std::clamp(coords[p], S(-1), S(1));
    Index i0 = 0;
    S t = 0;
    if (q > 1) {
      const S pos = (c + S(1)) * S(0.5) * static_cast<S>(q - 1);
      i0 = std::min<Index>(static_cast<Index>(std::floor(pos)), q - 2);
      t = pos - static_cast<S>(i0);
    }
    lower[static_cast<std::size_t>(p)] = i0;
    frac[static_cast<std::size_t>(p)] = t;
    const S* r0 = bank.ptr() + i0 * d;
    const S* r1 = q > 1 ? r0 + d : r0;
    S* y = out.mutable_ptr() + p * d;
    for (Index j = 0; j < d; ++j) y[j] = (S(1) - t) * r0[j] + t * r1[j];
  }
  if (needs_grad<S>({&bank, &coords})) {
    record<S>("grid_sample_1d", {bank, coords}, out,
              [=](typename Graph<S>::Node& node) {
                Tensor<S>& tb = node.inputs[0];
                Tensor<S>& tc = node.inputs[1];
                const S* g = node.output.grad().data();
                S* gbank = tb.requires_grad() ? tb.grad_buffer().data() : nullptr;
                S* gc = tc.requires_grad() ? tc.grad_buffer().data() : nullptr;
                const S half_span = S(0.5) * static_cast<S>(q - 1);
                for (Index p = 0; p < n; ++p) {
                  const Index i0 = lower[static_cast<std::size_t>(p)];
                  const S t = frac[static_cast<std::size_t>(p)];
                  const S* gy = g + p * d;
                  if (gbank) {
                    S* g0 = gbank + i0 * d;
                    for (Index j = 0; j < d; ++j) g0[j] += (S(1) - t) * gy[j];
                    if (q > 1) {
                      S* g1 = g0 + d;
                      for (Index j = 0; j < d; ++j) g1[j] += t * gy[j];
                    }
                  }
                  const S c = tc[p];
                  if (gc && q > 1 && c > S(-1) && c < S(1)) {
                    const S* r0 = tb.ptr() + i0 * d;
                    const S* r1 = r0 + d;
                    S acc = 0;
                    for (Index j = 0; j < d; ++j) acc += gy[j] * (r1[j] - r0[j]);
                    gc[p] += acc * half_span;
                  }
                }
              });
  }
  return out;
}

template <typename S>
Tensor<S> upsample_bilinear2x(const Tensor<S>& x) {
  require_rank("upsample_bilinear2x", "input", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = 2 * h, ow = 2 * w;
  struct Tap {
    Index i0, i1;
    S t;
  };
  auto taps = [](Index in, Index outn) {
    std::vector<Tap> v(static_cast<std::size_t>(outn));
    for (Index o = 0; o < outn; ++o) {
      S src = (static_cast<S>(o) + S(0.5)) * S(0.5) - S(0.5);
      if (src < S(0)) src = S(0);
      Index i0 = std::min<Index>(static_cast<Index>(std::floor(src)), in - 1);
      Index i1 = std::min<Index>(i0 + 1, in - 1);
      v[static_cast<std::size_t>(o)] = Tap{i0, i1, src - static_cast<S>(i0)};
    }
    return v;
  };
  const auto ty = taps(h, oh);
  const auto tx = taps(w, ow);
  Tensor<S> out(Shape{x.dim(0), x.dim(1), oh, ow});
  for (Index p = 0; p < planes; ++p) {
    const S* in = x.ptr() + p * h * w;
    S* y = out.mutable_ptr() + p * oh * ow;
    for (Index oy = 0; oy < oh; ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      for (Index ox = 0; ox < ow; ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        const S top = (S(1) - b.t) * in[a.i0 * w + b.i0] + b.t * in[a.i0 * w + b.i1];
        const S bot = (S(1) - b.t) * in[a.i1 * w + b.i0] + b.t * in[a.i1 * w + b.i1];
        y[oy * ow + ox] = (S(1) - a.t) * top + a.t * bot;
      }
    }
  }
  if (needs_grad<S>({&x})) {
    record<S>("upsample_bilinear2x", {x}, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index p = 0; p < planes; ++p) {
        S* gin = gx + p * h * w;
        const S* gy = g + p * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Tap& a = ty[static_cast<std::size_t>(oy)];
          for (Index ox = 0; ox < ow; ++ox) {
            const Tap& b = tx[static_cast<std::size_t>(ox)];
            const S v = gy[oy * ow + ox];
            gin[a.i0 * w + b.i0] += (S(1) - a.t) * (S(1) - b.t) * v;
            gin[a.i0 * w + b.i1] += (S(1) - a.t) * b.t * v;
            gin[a.i1 * w + b.i0] += a.t * (S(1) - b.t) * v;
            gin[a.i1 * w + b.i1] += a.t * b.t * v;
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> avg_pool2x(const Tensor<S>& x) {
  require_rank("avg_pool2x", "input", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) dim_error("avg_pool2x", "spatial axes must be even, got " + shape_string(x.shape()));
  const Index oh = h / 2, ow = w / 2;
  Tensor<S> out(Shape{x.dim(0), x.dim(1), oh, ow});
  for (Index p = 0; p < planes; ++p) {
    const S* in = x.ptr() + p * h * w;
    S* y = out.mutable_ptr() + p * oh * ow;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        const Index base = 2 * oy * w + 2 * ox;
        y[oy * ow + ox] = S(0.25) * (((in[base] + in[base + 1]) + in[base + w]) + in[base + w + 1]);
      }
    }
  }
  if (needs_grad<S>({&x})) {
    record<S>("avg_pool2x", {x}, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index p = 0; p < planes; ++p) {
        for (Index oy = 0; oy < oh; ++oy) {
          for (Index ox = 0; ox < ow; ++ox) {
            const S v = S(0.25) * g[p * oh * ow + oy * ow + ox];
            S* base = gx + p * h * w + 2 * oy * w + 2 * ox;
            base[0] += v;
            base[1] += v;
            base[w] += v;
            base[w + 1] += v;
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> adaptive_avg_pool2d(const Tensor<S>& x, Index out_h, Index out_w) {
  require_rank("adaptive_avg_pool2d", "input", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < out_h || w < out_w) {
    throw ConfigError("adaptive_avg_pool2d: input spatial size " + std::to_string(h) +
                      "x" + std::to_string(w) + " is smaller than target " +
                      std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  auto bins = [](Index in, Index outn) {
    std::vector<std::pair<Index, Index>> v(static_cast<std::size_t>(outn));
    for (Index i = 0; i < outn; ++i) {
      v[static_cast<std::size_t>(i)] = {(i * in) / outn, ((i + 1) * in + outn - 1) / outn};
    }
    return v;
  };
  const auto by = bins(h, out_h);
  const auto bx = bins(w, out_w);
  Tensor<S> out(Shape{x.dim(0), x.dim(1), out_h, out_w});
  for (Index p = 0; p < planes; ++p) {
    const S* in = x.ptr() + p * h * w;
    for (Index oy = 0; oy < out_h; ++oy) {
      const auto [y0, y1] = by[static_cast<std::size_t>(oy)];
      for (Index ox = 0; ox < out_w; ++ox) {
        const auto [x0, x1] = bx[static_cast<std::size_t>(ox)];
        S acc = 0;
        for (Index yy = y0; yy < y1; ++yy)
          for (Index xx = x0; xx < x1; ++xx) acc += in[yy * w + xx];
        out[p * out_h * out_w + oy * out_w + ox] = acc / static_cast<S>((y1 - y0) * (x1 - x0));
      }
    }
  }
  if (needs_grad<S>({&x})) {
    record<S>("adaptive_avg_pool2d", {x}, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index p = 0; p < planes; ++p) {
        for (Index oy = 0; oy < out_h; ++oy) {
          const auto [y0, y1] = by[static_cast<std::size_t>(oy)];
          for (Index ox = 0; ox < out_w; ++ox) {
            const auto [x0, x1] = bx[static_cast<std::size_t>(ox)];
            const S v = g[p * out_h * out_w + oy * out_w + ox] /
                        static_cast<S>((y1 - y0) * (x1 - x0));
            for (Index yy = y0; yy < y1; ++yy)
              for (Index xx = x0; xx < x1; ++xx) gx[p * h * w + yy * w + xx] += v;
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    dim_error("reshape", "cannot view " + shape_string(x.shape()) + " as " +
                             shape_string(shape));
  }
  Tensor<S> out(std::move(shape), std::vector<S>(x.data().begin(), x.data().end()));
  if (needs_grad<S>({&x})) {
    record<S>("reshape", {x}, out, [](typename Graph<S>::Node& node) {
      const auto g = node.output.grad();
      auto gx = node.inputs[0].grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<int>& order) {
  const int r = x.rank();
  if (static_cast<int>(order.size()) != r) dim_error("permute", "order length must equal rank");
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (int a : order) {
    if (a < 0 || a >= r || seen[static_cast<std::size_t>(a)]) dim_error("permute", "invalid axis order");
    seen[static_cast<std::size_t>(a)] = true;
  }
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<std::size_t>(i)] = x.dim(order[static_cast<std::size_t>(i)]);
  const Shape in_strides = row_strides(x.shape());
  // Source offset for every output element, in output order.
  std::array<Index, 4> ext{1, 1, 1, 1}, st{0, 0, 0, 0};
  for (int i = 0; i < r; ++i) {
    ext[static_cast<std::size_t>(4 - r + i)] = out_shape[static_cast<std::size_t>(i)];
    st[static_cast<std::size_t>(4 - r + i)] = in_strides[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }
  Tensor<S> out(out_shape);
  auto walk = [ext, st](auto&& f) {
    Index o = 0;
    for (Index i0 = 0; i0 < ext[0]; ++i0)
      for (Index i1 = 0; i1 < ext[1]; ++i1)
        for (Index i2 = 0; i2 < ext[2]; ++i2) {
          const Index base = i0 * st[0] + i1 * st[1] + i2 * st[2];
          for (Index i3 = 0; i3 < ext[3]; ++i3, ++o) f(o, base + i3 * st[3]);
        }
  };
  const S* in = x.ptr();
  S* y = out.mutable_ptr();
  walk([&](Index o, Index src) { y[o] = in[src]; });
  if (needs_grad<S>({&x})) {
    record<S>("permute", {x}, out, [walk](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      walk([&](Index o, Index src) { gx[src] += g[o]; });
    });
  }
  return out;
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
  if (parts.empty()) dim_error("concat", "no inputs");
  const int r = parts.front().rank();
  const int a = normalize_axis("concat", axis, r);
  Shape out_shape = parts.front().shape();
  out_shape[static_cast<std::size_t>(a)] = 0;
  for (const auto& t : parts) {
    if (t.rank() != r) dim_error("concat", "rank mismatch");
    for (int i = 0; i < r; ++i) {
      if (i != a && t.dim(i) != parts.front().dim(i)) {
        dim_error("concat", "axis " + std::to_string(i) + " mismatch: " +
                                shape_string(t.shape()) + " vs " +
                                shape_string(parts.front().shape()));
      }
    }
    out_shape[static_cast<std::size_t>(a)] += t.dim(a);
  }
  Index outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
  for (int i = a + 1; i < r; ++i) inner *= out_shape[static_cast<std::size_t>(i)];
  const Index total = out_shape[static_cast<std::size_t>(a)];
  Tensor<S> out(out_shape);
  std::vector<Index> offsets;
  Index offset = 0;
  for (const auto& t : parts) {
    offsets.push_back(offset);
    const Index len = t.dim(a) * inner;
    for (Index o = 0; o < outer; ++o) {
      std::copy_n(t.ptr() + o * len, len, out.mutable_ptr() + (o * total + offset) * inner);
    }
    offset += t.dim(a);
  }
  bool any = false;
  for (const auto& t : parts) any = any || needs_grad<S>({&t});
  if (any) {
    record<S>("concat", parts, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        Tensor<S>& t = node.inputs[k];
        if (!t.requires_grad()) continue;
        const Index len = t.dim(a) * inner;
        S* gt = t.grad_buffer().data();
        for (Index o = 0; o < outer; ++o) {
          const S* src = g + (o * total + offsets[k]) * inner;
          S* dst = gt + o * len;
          for (Index i = 0; i < len; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> narrow(const Tensor<S>& x, int axis, Index start, Index length) {
  const int a = normalize_axis("narrow", axis, x.rank());
  if (start < 0 || length <= 0 || start + length > x.dim(a)) {
    dim_error("narrow", "range [" + std::to_string(start) + ", " +
                            std::to_string(start + length) + ") outside axis " +
                            std::to_string(a) + " of " + shape_string(x.shape()));
  }
  Index outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= x.dim(i);
  for (int i = a + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const Index full = x.dim(a);
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(a)] = length;
  Tensor<S> out(out_shape);
  for (Index o = 0; o < outer; ++o) {
    std::copy_n(x.ptr() + (o * full + start) * inner, length * inner,
                out.mutable_ptr() + o * length * inner);
  }
  if (needs_grad<S>({&x})) {
    record<S>("narrow", {x}, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index o = 0; o < outer; ++o) {
        S* dst = gx + (o * full + start) * inner;
        const S* src = g + o * length * inner;
        for (Index i = 0; i < length * inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> window_member(const Tensor<S>& x, Index dy, Index dx) {
  require_rank("window_member", "input", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) dim_error("window_member", "spatial axes must be even, got " + shape_string(x.shape()));
  const Index oh = h / 2, ow = w / 2;
  Tensor<S> out(Shape{x.dim(0), x.dim(1), oh, ow});
  for (Index p = 0; p < planes; ++p)
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox)
        out[(p * oh + oy) * ow + ox] = x[p * h * w + (2 * oy + dy) * w + 2 * ox + dx];
  if (needs_grad<S>({&x})) {
    record<S>("window_member", {x}, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index p = 0; p < planes; ++p)
        for (Index oy = 0; oy < oh; ++oy)
          for (Index ox = 0; ox < ow; ++ox)
            gx[p * h * w + (2 * oy + dy) * w + 2 * ox + dx] += g[(p * oh + oy) * ow + ox];
    });
  }
  return out;
}

template <typename S>
Tensor<S> pad_replicate_even(const Tensor<S>& x) {
  require_rank("pad_replicate_even", "input", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 == 0 && w % 2 == 0) return x;
  const Index oh = h + h % 2, ow = w + w % 2;
  Tensor<S> out(Shape{x.dim(0), x.dim(1), oh, ow});
  for (Index p = 0; p < planes; ++p)
    for (Index y = 0; y < oh; ++y)
      for (Index xx = 0; xx < ow; ++xx)
        out[(p * oh + y) * ow + xx] = x[p * h * w + std::min(y, h - 1) * w + std::min(xx, w - 1)];
  if (needs_grad<S>({&x})) {
    record<S>("pad_replicate_even", {x}, out, [=](typename Graph<S>::Node& node) {
      const S* g = node.output.grad().data();
      S* gx = node.inputs[0].grad_buffer().data();
      for (Index p = 0; p < planes; ++p)
        for (Index y = 0; y < oh; ++y)
          for (Index xx = 0; xx < ow; ++xx)
            gx[p * h * w + std::min(y, h - 1) * w + std::min(xx, w - 1)] += g[(p * oh + y) * ow + xx];
    });
  }
  return out;
}

template <typename S>
Tensor<S> apply_pixel_kernels(const Tensor<S>& image, const Tensor<S>& kernels) {
  constexpr const char* op = "apply_pixel_kernels";
  require_rank(op, "image", image.shape(), 4);
  require_rank(op, "kernels", kernels.shape(), 4);
  const Index batch = image.dim(0), channels = image.dim(1), h = image.dim(2), w = image.dim(3);
  const Index taps = kernels.dim(1);
  const auto k = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(taps))));
  if (k * k != taps || k % 2 == 0) dim_error(op, "kernel axis must hold an odd square number of taps");
  if (kernels.dim(0) != batch || kernels.dim(2) != h || kernels.dim(3) != w) {
    dim_error(op, "kernels " + shape_string(kernels.shape()) + " do not match image " +
                      shape_string(image.shape()));
  }
  const Index radius = k / 2, plane = h * w;
  Tensor<S> out(image.shape());
  for (Index b = 0; b < batch; ++b) {
    const S* kb = kernels.ptr() + b * taps * plane;
    for (Index c = 0; c < channels; ++c) {
      const S* in = image.ptr() + (b * channels + c) * plane;
      S* y = out.mutable_ptr() + (b * channels + c) * plane;
      for (Index py = 0; py < h; ++py) {
        for (Index px = 0; px < w; ++px) {
          S acc = 0;
          for (Index ky = 0; ky < k; ++ky) {
            const Index sy = py + ky - radius;
            if (sy < 0 || sy >= h) continue;
            for (Index kx = 0; kx < k; ++kx) {
              const Index sx = px + kx - radius;
              if (sx < 0 || sx >= w) continue;
              acc += kb[(ky * k + kx) * plane + py * w + px] * in[sy * w + sx];
            }
          }
          y[py * w + px] = acc;
        }
      }
    }
  }
  if (needs_grad<S>({&image, &kernels})) {
    record<S>(op, {image, kernels}, out, [=](typename Graph<S>::Node& node) {
      Tensor<S>& ti = node.inputs[0];
      Tensor<S>& tk = node.inputs[1];
      const S* g = node.output.grad().data();
      S* gi = ti.requires_grad() ? ti.grad_buffer().data() : nullptr;
      S* gk = tk.requires_grad() ? tk.grad_buffer().data() : nullptr;
      for (Index b = 0; b < batch; ++b) {
        const S* kb = tk.ptr() + b * taps * plane;
        for (Index c = 0; c < channels; ++c) {
          const S* in = ti.ptr() + (b * channels + c) * plane;
          const S* gy = g + (b * channels + c) * plane;
          for (Index py = 0; py < h; ++py) {
            for (Index px = 0; px < w; ++px) {
              const S v = gy[py * w + px];
              for (Index ky = 0; ky < k; ++ky) {
                const Index sy = py + ky - radius;
                if (sy < 0 || sy >= h) continue;
                for (Index kx = 0; kx < k; ++kx) {
                  const Index sx = px + kx - radius;
                  if (sx < 0 || sx >= w) continue;
                  const Index kidx = (ky * k + kx) * plane + py * w + px;
                  if (gk) gk[b * taps * plane + kidx] += v * in[sy * w + sx];
                  if (gi) gi[(b * channels + c) * plane + sy * w + sx] += v * kb[kidx];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  S acc = 0;
  for (S v : x.data()) acc += v;
  Tensor<S> out = Tensor<S>::scalar(acc);
  if (needs_grad<S>({&x})) {
    record<S>("sum", {x}, out, [](typename Graph<S>::Node& node) {
      const S g = node.output.grad()[0];
      for (S& v : node.inputs[0].grad_buffer()) v += g;
    });
  }
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
  S acc = 0;
  for (S v : x.data()) acc += v;
  const S inv = S(1) / static_cast<S>(x.size());
  Tensor<S> out = Tensor<S>::scalar(acc * inv);
  if (needs_grad<S>({&x})) {
    record<S>("mean", {x}, out, [inv](typename Graph<S>::Node& node) {
      const S g = node.output.grad()[0] * inv;
      for (S& v : node.inputs[0].grad_buffer()) v += g;
    });
  }
  return out;
}

#define MCDK_INSTANTIATE_OPS(S)                                                          \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,        \
                            const Conv2dOptions&);                                       \
  template Tensor<S> elementwise(const Tensor<S>&, UnaryFn);                             \
  template Tensor<S> elementwise(const Tensor<S>&, const Tensor<S>&, BinaryFn);          \
  template Tensor<S> affine(const Tensor<S>&, S, S);                                     \
  template Tensor<S> softmax(const Tensor<S>&, int);                                     \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> grid_sample_1d(const Tensor<S>&, const Tensor<S>&);                 \
  template Tensor<S> upsample_bilinear2x(const Tensor<S>&);                              \
  template Tensor<S> avg_pool2x(const Tensor<S>&);                                       \
  template Tensor<S> adaptive_avg_pool2d(const Tensor<S>&, Index, Index);                \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                   \
  template Tensor<S> permute(const Tensor<S>&, const std::vector<int>&);                 \
  template Tensor<S> concat(const std::vector<Tensor<S>>&, int);                         \
  template Tensor<S> narrow(const Tensor<S>&, int, Index, Index);                        \
  template Tensor<S> window_member(const Tensor<S>&, Index, Index);                      \
  template Tensor<S> pad_replicate_even(const Tensor<S>&);                               \
  template Tensor<S> apply_pixel_kernels(const Tensor<S>&, const Tensor<S>&);            \
  template Tensor<S> sum(const Tensor<S>&);                                              \
  template Tensor<S> mean(const Tensor<S>&);

MCDK_INSTANTIATE_OPS(float)
MCDK_INSTANTIATE_OPS(double)

#undef MCDK_INSTANTIATE_OPS

}  // namespace mcdk::ops
