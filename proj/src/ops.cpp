// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <new>
#include <utility>

#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) throw InputError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

void require_scalar(const Var& v, const char* op) {
  if (v.value().size() != 1) {
    throw InputError(std::string(op) + ": expected a one-element tensor, got " + v.shape().str());
  }
}

// Output columns [first, last) whose input column ox * stride + x0 lies inside [0, width).
std::pair<int, int> valid_columns(int x0, int stride, int width, int out_w) {
  int first = x0 >= 0 ? 0 : (-x0 + stride - 1) / stride;
  int last = width - 1 - x0 < 0 ? 0 : (width - 1 - x0) / stride + 1;
  first = std::min(first, out_w);
  last = std::clamp(last, first, out_w);
  return {first, last};
}

// Rows of `col` are (c, ky, kx); columns are output pixels (oy, ox).
void im2col(const double* x, int channels, int height, int width, int kh, int kw, const ConvGeometry& g,
            int out_h, int out_w, double* col) {
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const double* src_plane = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double* dst = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * out_plane;
        const int x0 = kx * g.dilation - g.padding;
        const auto [first, last] = valid_columns(x0, g.stride, width, out_w);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          double* row = dst + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = src_plane + static_cast<std::size_t>(iy) * width + x0;
          std::fill(row, row + first, 0.0);
          if (g.stride == 1) {
            std::copy(src + first, src + last, row + first);
          } else {
            for (int ox = first; ox < last; ++ox) row[ox] = src[ox * g.stride];
          }
          std::fill(row + last, row + out_w, 0.0);
        }
      }
    }
  }
}

void col2im(const double* col, int channels, int height, int width, int kh, int kw, const ConvGeometry& g,
            int out_h, int out_w, double* dx) {
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    double* dst_plane = dx + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const double* src = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * out_plane;
        const int x0 = kx * g.dilation - g.padding;
        const auto [first, last] = valid_columns(x0, g.stride, width, out_w);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          if (iy < 0 || iy >= height) continue;
          const double* row = src + static_cast<std::size_t>(oy) * out_w;
          double* dst = dst_plane + static_cast<std::size_t>(iy) * width + x0;
          for (int ox = first; ox < last; ++ox) dst[ox * g.stride] += row[ox];
        }
      }
    }
  }
}

struct AlignedDelete {
  void operator()(double* p) const { ::operator delete[](p, std::align_val_t{64}); }
};
using ScratchBuffer = std::unique_ptr<double[], AlignedDelete>;

// Scratch buffer without value-initialization; im2col writes every element.
ScratchBuffer scratch(std::size_t n) {
  return ScratchBuffer(static_cast<double*>(::operator new[](n * sizeof(double), std::align_val_t{64})));
}

bool is_pointwise(const Shape& w, const ConvGeometry& g) {
  return w.h == 1 && w.w == 1 && g.stride == 1 && g.padding == 0;
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  const double* src = x.data();
  double* dst = out.data();
  for (std::size_t i = 0, n = x.size(); i < n; ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (xs.c != ws.c) {
    throw InputError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                     std::to_string(ws.c));
  }
  if (bias.defined() && !(bias.shape() == Shape{1, ws.n, 1, 1})) {
    throw InputError("conv2d: bias shape " + bias.shape().str() + " does not match kernel " + ws.str());
  }
  const int out_h = g.output_size(xs.h, ws.h);
  const int out_w = g.output_size(xs.w, ws.w);
  if (out_h < 1 || out_w < 1) throw InputError("conv2d: input " + xs.str() + " too small for kernel " + ws.str());

  const int k = ws.c * ws.h * ws.w;
  const std::size_t p = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t in_item = static_cast<std::size_t>(xs.c) * xs.plane();
  const std::size_t out_item = static_cast<std::size_t>(ws.n) * p;
  const bool pointwise = is_pointwise(ws, g);

  Tensor out(Shape{xs.n, ws.n, out_h, out_w});
  ConstMatMap wm(weight.value().data(), ws.n, k);
  auto col = scratch(pointwise ? 0 : static_cast<std::size_t>(k) * p);
  for (int n = 0; n < xs.n; ++n) {
    const double* xin = x.value().data() + n * in_item;
    if (!pointwise) im2col(xin, xs.c, xs.h, xs.w, ws.h, ws.w, g, out_h, out_w, col.get());
    ConstMatMap cm(pointwise ? xin : col.get(), k, static_cast<Eigen::Index>(p));
    MatMap ym(out.data() + n * out_item, ws.n, static_cast<Eigen::Index>(p));
    ym.noalias() = wm * cm;
    if (bias.defined()) {
      const double* b = bias.value().data();
      for (int c = 0; c < ws.n; ++c) ym.row(c).array() += b[c];
    }
  }

  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  Node* xn = x.node();
  Node* wn = weight.node();
  Node* bn = bias.defined() ? bias.node() : nullptr;
  return make_result(std::move(out), parents, [=](Node& self) {
    const Tensor& gout = self.grad;
    ConstMatMap wmat(wn->value.data(), ws.n, k);
    auto cbuf = scratch(pointwise ? 0 : static_cast<std::size_t>(k) * p);
    auto dcol = scratch(pointwise ? 0 : static_cast<std::size_t>(k) * p);
    for (int n = 0; n < xs.n; ++n) {
      ConstMatMap gm(gout.data() + n * out_item, ws.n, static_cast<Eigen::Index>(p));
      const double* xin = xn->value.data() + n * in_item;
      if (wn->requires_grad) {
        if (!pointwise) im2col(xin, xs.c, xs.h, xs.w, ws.h, ws.w, g, out_h, out_w, cbuf.get());
        ConstMatMap cm(pointwise ? xin : cbuf.get(), k, static_cast<Eigen::Index>(p));
        MatMap dw(wn->grad_buffer().data(), ws.n, k);
        dw.noalias() += gm * cm.transpose();
      }
      if (bn && bn->requires_grad) {
        double* db = bn->grad_buffer().data();
        for (int c = 0; c < ws.n; ++c) db[c] += gm.row(c).sum();
      }
      if (xn->requires_grad) {
        double* dx = xn->grad_buffer().data() + n * in_item;
        if (pointwise) {
          MatMap dxm(dx, k, static_cast<Eigen::Index>(p));
          dxm.noalias() += wmat.transpose() * gm;
        } else {
          MatMap dcm(dcol.get(), k, static_cast<Eigen::Index>(p));
          dcm.noalias() = wmat.transpose() * gm;
          col2im(dcol.get(), xs.c, xs.h, xs.w, ws.h, ws.w, g, out_h, out_w, dx);
        }
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor out = a.value();
  out += b.value();
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) an->grad_buffer() += self.grad;
    if (bn->requires_grad) bn->grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) an->grad_buffer() += self.grad;
    if (bn->requires_grad) {
      double* d = bn->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a.shape(), b.shape(), "mul");
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(std::move(out), {a, b}, [an, bn](Node& self) {
    const double* g = self.grad.data();
    if (an->requires_grad) {
      double* d = an->grad_buffer().data();
      const double* bv = bn->value.data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (bn->requires_grad) {
      double* d = bn->grad_buffer().data();
      const double* av = an->value.data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& x, double k) {
  Tensor out = x.value();
  out *= k;
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, k](Node& self) {
    double* d = xn->grad_buffer().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += k * self.grad[i];
  });
}

Var add_scalar(const Var& x, double k) {
  Tensor out = map_values(x.value(), [k](double v) { return v + k; });
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn](Node& self) { xn->grad_buffer() += self.grad; });
}

Var sub_broadcast_scalar(const Var& x, const Var& s) {
  require_scalar(s, "sub_broadcast_scalar");
  const double sv = s.value()[0];
  Tensor out = map_values(x.value(), [sv](double v) { return v - sv; });
  Node* xn = x.node();
  Node* sn = s.node();
  return make_result(std::move(out), {x, s}, [xn, sn](Node& self) {
    if (xn->requires_grad) xn->grad_buffer() += self.grad;
    if (sn->requires_grad) {
      double total = 0.0;
      for (double g : self.grad.values()) total += g;
      sn->grad_buffer()[0] -= total;
    }
  });
}

Var square(const Var& x) {
  Tensor out = map_values(x.value(), [](double v) { return v * v; });
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn](Node& self) {
    double* d = xn->grad_buffer().data();
    const double* v = xn->value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += 2.0 * v[i] * self.grad[i];
  });
}

Var mul_channelwise(const Var& x, const Var& a) {
  const Shape xs = x.shape();
  if (!(a.shape() == Shape{xs.n, xs.c, 1, 1})) {
    throw InputError("mul_channelwise: factor " + a.shape().str() + " does not broadcast over " + xs.str());
  }
  Tensor out = x.value();
  const std::size_t hw = xs.plane();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const double k = a.value().at(n, c, 0, 0);
      double* p = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) p[i] *= k;
    }
  }
  Node* xn = x.node();
  Node* an = a.node();
  return make_result(std::move(out), {x, a}, [xn, an, xs, hw](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const double* g = self.grad.plane(n, c);
        if (xn->requires_grad) {
          const double k = an->value.at(n, c, 0, 0);
          double* d = xn->grad_buffer().plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) d[i] += k * g[i];
        }
        if (an->requires_grad) {
          const double* v = xn->value.plane(n, c);
          double acc = 0.0;
          for (std::size_t i = 0; i < hw; ++i) acc += g[i] * v[i];
          an->grad_buffer().at(n, c, 0, 0) += acc;
        }
      }
    }
  });
}

Var mul_spatialwise(const Var& x, const Var& a) {
  const Shape xs = x.shape();
  if (!(a.shape() == Shape{xs.n, 1, xs.h, xs.w})) {
    throw InputError("mul_spatialwise: factor " + a.shape().str() + " does not broadcast over " + xs.str());
  }
  Tensor out = x.value();
  const std::size_t hw = xs.plane();
  for (int n = 0; n < xs.n; ++n) {
    const double* k = a.value().plane(n, 0);
    for (int c = 0; c < xs.c; ++c) {
      double* p = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) p[i] *= k[i];
    }
  }
  Node* xn = x.node();
  Node* an = a.node();
  return make_result(std::move(out), {x, a}, [xn, an, xs, hw](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      const double* k = an->value.plane(n, 0);
      double* dk = an->requires_grad ? an->grad_buffer().plane(n, 0) : nullptr;
      for (int c = 0; c < xs.c; ++c) {
        const double* g = self.grad.plane(n, c);
        if (xn->requires_grad) {
          double* d = xn->grad_buffer().plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) d[i] += k[i] * g[i];
        }
        if (dk) {
          const double* v = xn->value.plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) dk[i] += g[i] * v[i];
        }
      }
    }
  });
}

Var lerp(const Var& alpha, const Var& a, const Var& b) {
  require_scalar(alpha, "lerp");
  require_same(a.shape(), b.shape(), "lerp");
  const double t = alpha.value()[0];
  Tensor out(a.shape());
  const double* av = a.value().data();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t * av[i] + (1.0 - t) * bv[i];
  Node* tn = alpha.node();
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(std::move(out), {alpha, a, b}, [tn, an, bn](Node& self) {
    const double t = tn->value[0];
    const double* g = self.grad.data();
    const std::size_t n = self.grad.size();
    if (tn->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += g[i] * (an->value[i] - bn->value[i]);
      tn->grad_buffer()[0] += acc;
    }
    if (an->requires_grad) {
      double* d = an->grad_buffer().data();
      for (std::size_t i = 0; i < n; ++i) d[i] += t * g[i];
    }
    if (bn->requires_grad) {
      double* d = bn->grad_buffer().data();
      for (std::size_t i = 0; i < n; ++i) d[i] += (1.0 - t) * g[i];
    }
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = map_values(x.value(), [slope](double v) { return v > 0.0 ? v : slope * v; });
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, slope](Node& self) {
    double* d = xn->grad_buffer().data();
    const double* v = xn->value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += (v[i] > 0.0 ? 1.0 : slope) * self.grad[i];
  });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var sigmoid(const Var& x) {
  Tensor out = map_values(x.value(), [](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn](Node& self) {
    double* d = xn->grad_buffer().data();
    const double* y = self.value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += y[i] * (1.0 - y[i]) * self.grad[i];
  });
}

Var tanh(const Var& x) {
  Tensor out = map_values(x.value(), [](double v) { return std::tanh(v); });
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn](Node& self) {
    double* d = xn->grad_buffer().data();
    const double* y = self.value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += (1.0 - y[i] * y[i]) * self.grad[i];
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = map_values(x.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); });
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, lo, hi](Node& self) {
    double* d = xn->grad_buffer().data();
    const double* v = xn->value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (v[i] > lo && v[i] < hi) d[i] += self.grad[i];
    }
  });
}

Var instance_norm(const Var& x, double eps) {
  const Shape xs = x.shape();
  const std::size_t hw = xs.plane();
  const std::size_t planes = static_cast<std::size_t>(xs.n) * xs.c;
  Tensor out(xs);
  std::vector<double> inv_std(planes);
  for (std::size_t q = 0; q < planes; ++q) {
    const double* v = x.value().data() + q * hw;
    double mu = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mu += v[i];
    mu /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (v[i] - mu) * (v[i] - mu);
    var /= static_cast<double>(hw);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[q] = is;
    double* y = out.data() + q * hw;
    for (std::size_t i = 0; i < hw; ++i) y[i] = (v[i] - mu) * is;
  }
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, hw, planes, inv_std = std::move(inv_std)](Node& self) {
    const double count = static_cast<double>(hw);
    for (std::size_t q = 0; q < planes; ++q) {
      const double* g = self.grad.data() + q * hw;
      const double* y = self.value.data() + q * hw;
      double sum_g = 0.0;
      double sum_gy = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_g += g[i];
        sum_gy += g[i] * y[i];
      }
      double* d = xn->grad_buffer().data() + q * hw;
      const double k = inv_std[q] / count;
      for (std::size_t i = 0; i < hw; ++i) d[i] += k * (count * g[i] - sum_g - y[i] * sum_gy);
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw InputError("concat_channels: nothing to concatenate");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const Var& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw InputError("concat_channels: shape mismatch " + first.str() + " vs " + s.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  Tensor out(os);
  const std::size_t hw = first.plane();
  for (int n = 0; n < os.n; ++n) {
    double* dst = out.plane(n, 0);
    for (const Var& p : parts) {
      const std::size_t len = static_cast<std::size_t>(p.shape().c) * hw;
      std::copy_n(p.value().plane(n, 0), len, dst);
      dst += len;
    }
  }
  std::vector<Node*> nodes;
  for (const Var& p : parts) nodes.push_back(p.node());
  return make_result(std::move(out), parts, [nodes, hw](Node& self) {
    for (int n = 0; n < self.grad.shape().n; ++n) {
      const double* src = self.grad.plane(n, 0);
      for (Node* p : nodes) {
        const std::size_t len = static_cast<std::size_t>(p->value.shape().c) * hw;
        if (p->requires_grad) {
          double* d = p->grad_buffer().plane(n, 0);
          for (std::size_t i = 0; i < len; ++i) d[i] += src[i];
        }
        src += len;
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Shape xs = x.shape();
  const Shape os{xs.n, xs.c, xs.h * 2, xs.w * 2};
  Tensor out(os);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < os.h; ++y) {
        const double* row = src + static_cast<std::size_t>(y / 2) * xs.w;
        double* orow = dst + static_cast<std::size_t>(y) * os.w;
        for (int xo = 0; xo < os.w; ++xo) orow[xo] = row[xo / 2];
      }
    }
  }
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, xs, os](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const double* g = self.grad.plane(n, c);
        double* d = xn->grad_buffer().plane(n, c);
        for (int y = 0; y < os.h; ++y) {
          double* row = d + static_cast<std::size_t>(y / 2) * xs.w;
          const double* grow = g + static_cast<std::size_t>(y) * os.w;
          for (int xo = 0; xo < os.w; ++xo) row[xo / 2] += grow[xo];
        }
      }
    }
  });
}

Tensor avg_pool2x2(const Tensor& x) {
  const Shape xs = x.shape();
  if (xs.h % 2 != 0 || xs.w % 2 != 0) throw InputError("avg_pool2x2: odd spatial size " + xs.str());
  const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
  Tensor out(os);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const double* src = x.plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < os.h; ++y) {
        const double* r0 = src + static_cast<std::size_t>(2 * y) * xs.w;
        const double* r1 = r0 + xs.w;
        for (int xo = 0; xo < os.w; ++xo) {
          dst[static_cast<std::size_t>(y) * os.w + xo] =
              0.25 * (r0[2 * xo] + r0[2 * xo + 1] + r1[2 * xo] + r1[2 * xo + 1]);
        }
      }
    }
  }
  return out;
}

Var avg_pool2x2(const Var& x) {
  const Shape xs = x.shape();
  Tensor out = avg_pool2x2(x.value());
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, xs](Node& self) {
    const Shape os = self.value.shape();
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const double* g = self.grad.plane(n, c);
        double* d = xn->grad_buffer().plane(n, c);
        for (int y = 0; y < os.h; ++y) {
          double* r0 = d + static_cast<std::size_t>(2 * y) * xs.w;
          double* r1 = r0 + xs.w;
          for (int xo = 0; xo < os.w; ++xo) {
            const double v = 0.25 * g[static_cast<std::size_t>(y) * os.w + xo];
            r0[2 * xo] += v;
            r0[2 * xo + 1] += v;
            r1[2 * xo] += v;
            r1[2 * xo + 1] += v;
          }
        }
      }
    }
  });
}

Tensor flip_horizontal(const Tensor& x) {
  Tensor out(x.shape());
  const Shape s = x.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < s.h; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * s.w;
        for (int xo = 0; xo < s.w; ++xo) dst[row + xo] = src[row + (s.w - 1 - xo)];
      }
    }
  }
  return out;
}

Var global_avg_pool(const Var& x) {
  const Shape xs = x.shape();
  const std::size_t hw = xs.plane();
  Tensor out(Shape{xs.n, xs.c, 1, 1});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const double* p = x.value().plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc / static_cast<double>(hw);
    }
  }
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, xs, hw](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const double g = self.grad.at(n, c, 0, 0) / static_cast<double>(hw);
        double* d = xn->grad_buffer().plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) d[i] += g;
      }
    }
  });
}

Var channel_mean(const Var& x) {
  const Shape xs = x.shape();
  const std::size_t hw = xs.plane();
  Tensor out(Shape{xs.n, 1, xs.h, xs.w});
  for (int n = 0; n < xs.n; ++n) {
    double* dst = out.plane(n, 0);
    for (int c = 0; c < xs.c; ++c) {
      const double* p = x.value().plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] += p[i];
    }
    for (std::size_t i = 0; i < hw; ++i) dst[i] /= static_cast<double>(xs.c);
  }
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, xs, hw](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      const double* g = self.grad.plane(n, 0);
      for (int c = 0; c < xs.c; ++c) {
        double* d = xn->grad_buffer().plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) d[i] += g[i] / static_cast<double>(xs.c);
      }
    }
  });
}

Var channel_max(const Var& x) {
  const Shape xs = x.shape();
  const std::size_t hw = xs.plane();
  Tensor out(Shape{xs.n, 1, xs.h, xs.w});
  std::vector<int> argmax(static_cast<std::size_t>(xs.n) * hw, 0);
  for (int n = 0; n < xs.n; ++n) {
    double* dst = out.plane(n, 0);
    std::copy_n(x.value().plane(n, 0), hw, dst);
    int* am = argmax.data() + n * hw;
    for (int c = 1; c < xs.c; ++c) {
      const double* p = x.value().plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        if (p[i] > dst[i]) {
          dst[i] = p[i];
          am[i] = c;
        }
      }
    }
  }
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, xs, hw, argmax = std::move(argmax)](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      const double* g = self.grad.plane(n, 0);
      const int* am = argmax.data() + n * hw;
      Tensor& d = xn->grad_buffer();
      for (std::size_t i = 0; i < hw; ++i) d.plane(n, am[i])[i] += g[i];
    }
  });
}

Var mean(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  const double count = static_cast<double>(x.value().size());
  Node* xn = x.node();
  return make_result(Tensor::scalar(acc / count), {x}, [xn, count](Node& self) {
    const double g = self.grad[0] / count;
    double* d = xn->grad_buffer().data();
    for (std::size_t i = 0; i < xn->value.size(); ++i) d[i] += g;
  });
}

Var mean_abs_diff(const Var& a, const Var& b) {
  require_same(a.shape(), b.shape(), "mean_abs_diff");
  const double* av = a.value().data();
  const double* bv = b.value().data();
  const std::size_t n = a.value().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(av[i] - bv[i]);
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(Tensor::scalar(acc / static_cast<double>(n)), {a, b}, [an, bn, n](Node& self) {
    const double g = self.grad[0] / static_cast<double>(n);
    const double* av = an->value.data();
    const double* bv = bn->value.data();
    double* da = an->requires_grad ? an->grad_buffer().data() : nullptr;
    double* db = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = av[i] - bv[i];
      const double s = diff > 0.0 ? g : (diff < 0.0 ? -g : 0.0);
      if (da) da[i] += s;
      if (db) db[i] -= s;
    }
  });
}

Var sum_all(const std::vector<Var>& scalars) {
  double acc = 0.0;
  for (const Var& s : scalars) {
    require_scalar(s, "sum_all");
    acc += s.value()[0];
  }
  std::vector<Node*> nodes;
  for (const Var& s : scalars) nodes.push_back(s.node());
  return make_result(Tensor::scalar(acc), scalars, [nodes](Node& self) {
    for (Node* n : nodes) {
      if (n->requires_grad) n->grad_buffer()[0] += self.grad[0];
    }
  });
}

Var gram_matrix(const Var& x) {
  const Shape xs = x.shape();
  const auto hw = static_cast<Eigen::Index>(xs.plane());
  const double norm = 1.0 / (static_cast<double>(xs.c) * static_cast<double>(hw));
  Tensor out(Shape{xs.n, 1, xs.c, xs.c});
  for (int n = 0; n < xs.n; ++n) {
    ConstMatMap f(x.value().plane(n, 0), xs.c, hw);
    MatMap g(out.plane(n, 0), xs.c, xs.c);
    g.noalias() = norm * (f * f.transpose());
    // Mirror the upper triangle so the result is exactly symmetric.
    for (int a = 0; a < xs.c; ++a) {
      for (int b = a + 1; b < xs.c; ++b) g(b, a) = g(a, b);
    }
  }
  Node* xn = x.node();
  return make_result(std::move(out), {x}, [xn, xs, hw, norm](Node& self) {
    for (int n = 0; n < xs.n; ++n) {
      ConstMatMap gg(self.grad.plane(n, 0), xs.c, xs.c);
      ConstMatMap f(xn->value.plane(n, 0), xs.c, hw);
      MatMap d(xn->grad_buffer().plane(n, 0), xs.c, hw);
      const RowMat sym = gg + gg.transpose();
      d.noalias() += norm * (sym * f);
    }
  });
}

Var spectral_normalize(const Var& weight, const Tensor& u, const Tensor& v) {
  const Shape ws = weight.shape();
  const int k = ws.c * ws.h * ws.w;
  if (u.size() != static_cast<std::size_t>(ws.n) || v.size() != static_cast<std::size_t>(k)) {
    throw InputError("spectral_normalize: singular-vector sizes do not match kernel " + ws.str());
  }
  ConstMatMap wm(weight.value().data(), ws.n, k);
  Eigen::Map<const Eigen::VectorXd> uv(u.data(), ws.n);
  Eigen::Map<const Eigen::VectorXd> vv(v.data(), k);
  const double sigma = uv.dot(wm * vv);
  if (!std::isfinite(sigma)) throw InputError("spectral_normalize: non-finite singular value estimate");
  // A (numerically) zero kernel has nothing to normalize.
  if (std::abs(sigma) < 1e-12) {
    Node* wn = weight.node();
    return make_result(weight.value(), {weight}, [wn](Node& self) { wn->grad_buffer() += self.grad; });
  }
  Tensor out = weight.value();
  out *= 1.0 / sigma;
  Node* wn = weight.node();
  return make_result(std::move(out), {weight}, [wn, u, v, sigma, ws, k](Node& self) {
    const double* g = self.grad.data();
    const double* w = wn->value.data();
    double gw = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gw += g[i] * w[i];
    const double coupling = gw / (sigma * sigma);
    double* d = wn->grad_buffer().data();
    for (int r = 0; r < ws.n; ++r) {
      for (int c = 0; c < k; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * k + c;
        d[i] += g[i] / sigma - coupling * u[r] * v[c];
      }
    }
  });
}

}  // namespace tsi
