#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "vimp/tensor.hpp"

namespace vimp::nn {

// Handle into a Tape's node list.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

namespace detail {

template <typename Real>
using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatCM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

struct ConvGeom {
  int in_c = 0, in_h = 0, in_w = 0;
  int f = 0, k = 0, stride = 1;
  int pad_top = 0, pad_left = 0;
  int out_h = 0, out_w = 0;

  std::int64_t patch_rows() const { return static_cast<std::int64_t>(in_c) * k * k; }
  std::int64_t out_cols() const { return static_cast<std::int64_t>(out_h) * out_w; }
};

// Gathers padded k x k patches of one sample into a column matrix
// (in_c*k*k rows, out_h*out_w columns).
template <typename Real>
void im2col(const Real* x, const ConvGeom& g, MatCM<Real>& col) {
  col.setZero(g.patch_rows(), g.out_cols());
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const std::int64_t c_idx = static_cast<std::int64_t>(oy) * g.out_w + ox;
      Real* dst = col.data() + c_idx * g.patch_rows();
      for (int c = 0; c < g.in_c; ++c) {
        const Real* plane = x + static_cast<std::int64_t>(c) * g.in_h * g.in_w;
        for (int ki = 0; ki < g.k; ++ki) {
          const int iy = oy * g.stride - g.pad_top + ki;
          if (iy < 0 || iy >= g.in_h) {
            dst += g.k;
            continue;
          }
          const Real* row = plane + static_cast<std::int64_t>(iy) * g.in_w;
          for (int kj = 0; kj < g.k; ++kj) {
            const int ix = ox * g.stride - g.pad_left + kj;
            *dst++ = (ix >= 0 && ix < g.in_w) ? row[ix] : Real(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the (unpadded) image.
template <typename Real>
void col2im(const MatCM<Real>& col, const ConvGeom& g, Real* x) {
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const std::int64_t c_idx = static_cast<std::int64_t>(oy) * g.out_w + ox;
      const Real* src = col.data() + c_idx * g.patch_rows();
      for (int c = 0; c < g.in_c; ++c) {
        Real* plane = x + static_cast<std::int64_t>(c) * g.in_h * g.in_w;
        for (int ki = 0; ki < g.k; ++ki) {
          const int iy = oy * g.stride - g.pad_top + ki;
          if (iy < 0 || iy >= g.in_h) {
            src += g.k;
            continue;
          }
          Real* row = plane + static_cast<std::int64_t>(iy) * g.in_w;
          for (int kj = 0; kj < g.k; ++kj) {
            const int ix = ox * g.stride - g.pad_left + kj;
            if (ix >= 0 && ix < g.in_w) row[ix] += *src;
            ++src;
          }
        }
      }
    }
  }
}

}  // namespace detail

// Dynamically recorded op graph with reverse-mode gradients. A tape lives for
// one forward/backward pass; parameters are leaves copied in per step.
template <typename Real>
class Tape {
 public:
  Value leaf(Tensor<Real> v, bool requires_grad = false) {
    return push(std::move(v), requires_grad, {});
  }

  const Tensor<Real>& value(Value v) const { return nodes_[check(v)].value; }
  const Tensor<Real>& grad(Value v) const { return nodes_[check(v)].grad; }

  // --- elementwise -------------------------------------------------------------

  Value add(Value a, Value b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require_same_shape(ta, tb, "add");
    Tensor<Real> out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
    return push(std::move(out), rg(a) || rg(b), [this, a, b](Node& n) {
      accumulate(a, n.grad.data.data(), n.grad.numel());
      accumulate(b, n.grad.data.data(), n.grad.numel());
    });
  }

  Value sub(Value a, Value b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require_same_shape(ta, tb, "sub");
    Tensor<Real> out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
    return push(std::move(out), rg(a) || rg(b), [this, a, b](Node& n) {
      accumulate(a, n.grad.data.data(), n.grad.numel());
      if (rg(b)) {
        auto& gb = mutable_grad(b);
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) gb[i] -= n.grad[i];
      }
    });
  }

  Value mul(Value a, Value b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require_same_shape(ta, tb, "mul");
    Tensor<Real> out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
    return push(std::move(out), rg(a) || rg(b), [this, a, b](Node& n) {
      if (rg(a)) {
        auto& ga = mutable_grad(a);
        const auto& vb = val(b);
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * vb[i];
      }
      if (rg(b)) {
        auto& gb = mutable_grad(b);
        const auto& va = val(a);
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) gb[i] += n.grad[i] * va[i];
      }
    });
  }

  Value scale(Value a, Real c) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v *= c;
    return push(std::move(out), rg(a), [this, a, c](Node& n) {
      if (!rg(a)) return;
      auto& ga = mutable_grad(a);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) ga[i] += c * n.grad[i];
    });
  }

  Value relu(Value a) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v = v > Real(0) ? v : Real(0);
    return push(std::move(out), rg(a), [this, a](Node& n) {
      if (!rg(a)) return;
      auto& ga = mutable_grad(a);
      const auto& va = val(a);
      for (std::int64_t i = 0; i < n.grad.numel(); ++i)
        if (va[i] > Real(0)) ga[i] += n.grad[i];
    });
  }

  Value sigmoid(Value a) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v = Real(1) / (Real(1) + std::exp(-v));
    return push(std::move(out), rg(a), [this, a](Node& n) {
      if (!rg(a)) return;
      auto& ga = mutable_grad(a);
      const auto& y = n.value;
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * y[i] * (Real(1) - y[i]);
    });
  }

  Value exp(Value a) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v = std::exp(v);
    return push(std::move(out), rg(a), [this, a](Node& n) {
      if (!rg(a)) return;
      auto& ga = mutable_grad(a);
      const auto& y = n.value;
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * y[i];
    });
  }

  Value reshape(Value a, std::vector<int> shape) {
    Tensor<Real> out(std::move(shape));
    if (out.numel() != val(a).numel())
      throw ValidationError("reshape: numel mismatch, " + val(a).shape_str() + " -> " + out.shape_str());
    out.data = val(a).data;
    return push(std::move(out), rg(a), [this, a](Node& n) {
      accumulate(a, n.grad.data.data(), n.grad.numel());
    });
  }

  // [N,A] ++ [N,B] -> [N,A+B]
  Value concat_cols(Value a, Value b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    if (ta.ndim() != 2 || tb.ndim() != 2 || ta.dim(0) != tb.dim(0))
      throw ValidationError("concat_cols: want [N,A],[N,B], got " + ta.shape_str() + " and " + tb.shape_str());
    const int n = ta.dim(0), wa = ta.dim(1), wb = tb.dim(1);
    Tensor<Real> out({n, wa + wb});
    for (int r = 0; r < n; ++r) {
      std::copy_n(&ta.data[static_cast<std::size_t>(r) * wa], wa, &out.data[static_cast<std::size_t>(r) * (wa + wb)]);
      std::copy_n(&tb.data[static_cast<std::size_t>(r) * wb], wb,
                  &out.data[static_cast<std::size_t>(r) * (wa + wb) + wa]);
    }
    return push(std::move(out), rg(a) || rg(b), [this, a, b, n, wa, wb](Node& nd) {
      if (rg(a)) {
        auto& ga = mutable_grad(a);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < wa; ++c)
            ga[static_cast<std::int64_t>(r) * wa + c] += nd.grad[static_cast<std::int64_t>(r) * (wa + wb) + c];
      }
      if (rg(b)) {
        auto& gb = mutable_grad(b);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < wb; ++c)
            gb[static_cast<std::int64_t>(r) * wb + c] +=
                nd.grad[static_cast<std::int64_t>(r) * (wa + wb) + wa + c];
      }
    });
  }

  // --- dense / conv ---------------------------------------------------------------

  // x [N,In] * w [Out,In]^T + b [Out] -> [N,Out]
  Value dense(Value x, Value w, Value b) {
    const auto& tx = val(x);
    const auto& tw = val(w);
    const auto& tb = val(b);
    if (tx.ndim() != 2 || tw.ndim() != 2 || tb.ndim() != 1 || tx.dim(1) != tw.dim(1) ||
        tb.dim(0) != tw.dim(0))
      throw ValidationError("dense: shape mismatch, x=" + tx.shape_str() + " w=" + tw.shape_str() +
                            " b=" + tb.shape_str());
    const int n = tx.dim(0), in = tx.dim(1), out_f = tw.dim(0);
    Tensor<Real> out({n, out_f});
    {
      Eigen::Map<const detail::MatRM<Real>> xm(tx.data.data(), n, in);
      Eigen::Map<const detail::MatRM<Real>> wm(tw.data.data(), out_f, in);
      Eigen::Map<detail::MatRM<Real>> om(out.data.data(), n, out_f);
      om.noalias() = xm * wm.transpose();
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < out_f; ++c) om(r, c) += tb[c];
    }
    return push(std::move(out), rg(x) || rg(w) || rg(b), [this, x, w, b, n, in, out_f](Node& nd) {
      Eigen::Map<const detail::MatRM<Real>> gm(nd.grad.data.data(), n, out_f);
      if (rg(x)) {
        Eigen::Map<const detail::MatRM<Real>> wm(val(w).data.data(), out_f, in);
        Eigen::Map<detail::MatRM<Real>> gx(mutable_grad(x).data.data(), n, in);
        gx.noalias() += gm * wm;
      }
      if (rg(w)) {
        Eigen::Map<const detail::MatRM<Real>> xm(val(x).data.data(), n, in);
        Eigen::Map<detail::MatRM<Real>> gw(mutable_grad(w).data.data(), out_f, in);
        gw.noalias() += gm.transpose() * xm;
      }
      if (rg(b)) {
        auto& gb = mutable_grad(b);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < out_f; ++c) gb[c] += gm(r, c);
      }
    });
  }

  // x [N,C,H,W], w [F,C,k,k], b [F], symmetric zero padding.
  Value conv2d(Value x, Value w, Value b, int stride, int pad) {
    return conv2d_asym(x, w, b, stride, pad, pad, pad, pad);
  }

  // Same contract with per-side padding (top/bottom, left/right); even kernel
  // sizes need it to preserve spatial size.
  Value conv2d_asym(Value x, Value w, Value b, int stride, int pad_top, int pad_bottom, int pad_left,
                    int pad_right) {
    const auto& tx = val(x);
    const auto& tw = val(w);
    const auto& tb = val(b);
    if (tx.ndim() != 4 || tw.ndim() != 4 || tb.ndim() != 1)
      throw ValidationError("conv2d: want x[N,C,H,W] w[F,C,k,k] b[F], got x=" + tx.shape_str() +
                            " w=" + tw.shape_str() + " b=" + tb.shape_str());
    if (tw.dim(2) != tw.dim(3)) throw ValidationError("conv2d: non-square kernel");
    if (tx.dim(1) != tw.dim(1))
      throw ValidationError("conv2d: channel mismatch, expected C=" + std::to_string(tw.dim(1)) +
                            " got " + std::to_string(tx.dim(1)));
    if (tb.dim(0) != tw.dim(0)) throw ValidationError("conv2d: bias length mismatch");
    if (stride < 1) throw ValidationError("conv2d: stride must be >= 1");

    detail::ConvGeom g;
    g.in_c = tx.dim(1);
    g.in_h = tx.dim(2);
    g.in_w = tx.dim(3);
    g.f = tw.dim(0);
    g.k = tw.dim(2);
    g.stride = stride;
    g.pad_top = pad_top;
    g.pad_left = pad_left;
    g.out_h = (g.in_h + pad_top + pad_bottom - g.k) / stride + 1;
    g.out_w = (g.in_w + pad_left + pad_right - g.k) / stride + 1;
    if (g.in_h + pad_top + pad_bottom < g.k || g.in_w + pad_left + pad_right < g.k)
      throw ValidationError("conv2d: kernel larger than padded input, x=" + tx.shape_str() +
                            " k=" + std::to_string(g.k));

    const int n = tx.dim(0);
    Tensor<Real> out({n, g.f, g.out_h, g.out_w});
    const std::int64_t in_stride = static_cast<std::int64_t>(g.in_c) * g.in_h * g.in_w;
    const std::int64_t out_stride = static_cast<std::int64_t>(g.f) * g.out_h * g.out_w;

    Eigen::Map<const detail::MatRM<Real>> wm(tw.data.data(), g.f, g.patch_rows());
    detail::MatCM<Real> col;
    for (int s = 0; s < n; ++s) {
      detail::im2col(tx.data.data() + s * in_stride, g, col);
      Eigen::Map<detail::MatRM<Real>> om(out.data.data() + s * out_stride, g.f, g.out_cols());
      om.noalias() = wm * col;
      for (int f = 0; f < g.f; ++f) om.row(f).array() += tb[f];
    }

    return push(std::move(out), rg(x) || rg(w) || rg(b),
                [this, x, w, b, g, n, in_stride, out_stride](Node& nd) {
                  Eigen::Map<const detail::MatRM<Real>> wm(val(w).data.data(), g.f, g.patch_rows());
                  detail::MatCM<Real> col;
                  for (int s = 0; s < n; ++s) {
                    Eigen::Map<const detail::MatRM<Real>> gm(nd.grad.data.data() + s * out_stride, g.f,
                                                             g.out_cols());
                    if (rg(w) || rg(b)) {
                      if (rg(w)) {
                        detail::im2col(val(x).data.data() + s * in_stride, g, col);
                        Eigen::Map<detail::MatRM<Real>> gw(mutable_grad(w).data.data(), g.f,
                                                           g.patch_rows());
                        gw.noalias() += gm * col.transpose();
                      }
                      if (rg(b)) {
                        auto& gb = mutable_grad(b);
                        for (int f = 0; f < g.f; ++f) gb[f] += gm.row(f).sum();
                      }
                    }
                    if (rg(x)) {
                      detail::MatCM<Real> gcol = wm.transpose() * gm;
                      detail::col2im(gcol, g, mutable_grad(x).data.data() + s * in_stride);
                    }
                  }
                });
  }

  // Adjoint of conv2d: x [N,F,h,w], w [F,C,k,k], b [C] ->
  // [N,C,(h-1)*stride-2*pad+k+out_pad, ...]. With the same kernel tensor this
  // satisfies <conv2d(u),v> == <u, conv2d_transpose(v)> (zero biases).
  Value conv2d_transpose(Value x, Value w, Value b, int stride, int pad, int out_pad = 0) {
    const auto& tx = val(x);
    const auto& tw = val(w);
    const auto& tb = val(b);
    if (tx.ndim() != 4 || tw.ndim() != 4 || tb.ndim() != 1)
      throw ValidationError("conv2d_transpose: want x[N,F,h,w] w[F,C,k,k] b[C]");
    if (tx.dim(1) != tw.dim(0))
      throw ValidationError("conv2d_transpose: channel mismatch, expected F=" +
                            std::to_string(tw.dim(0)) + " got " + std::to_string(tx.dim(1)));
    if (tb.dim(0) != tw.dim(1)) throw ValidationError("conv2d_transpose: bias length mismatch");
    if (out_pad < 0 || out_pad >= stride)
      throw ValidationError("conv2d_transpose: out_pad must be in [0, stride)");

    detail::ConvGeom g;  // geometry of the *output* image as conv2d input
    g.in_c = tw.dim(1);
    g.f = tw.dim(0);
    g.k = tw.dim(2);
    g.stride = stride;
    g.pad_top = pad;
    g.pad_left = pad;
    g.in_h = (tx.dim(2) - 1) * stride - 2 * pad + g.k + out_pad;
    g.in_w = (tx.dim(3) - 1) * stride - 2 * pad + g.k + out_pad;
    g.out_h = tx.dim(2);
    g.out_w = tx.dim(3);
    if (g.in_h <= 0 || g.in_w <= 0)
      throw ValidationError("conv2d_transpose: non-positive output size");
    // the adjoint geometry must map back exactly
    if ((g.in_h + 2 * pad - g.k) / stride + 1 != g.out_h)
      throw ValidationError("conv2d_transpose: inconsistent geometry");

    const int n = tx.dim(0);
    Tensor<Real> out({n, g.in_c, g.in_h, g.in_w});
    const std::int64_t in_stride = static_cast<std::int64_t>(g.f) * g.out_h * g.out_w;
    const std::int64_t out_stride = static_cast<std::int64_t>(g.in_c) * g.in_h * g.in_w;

    Eigen::Map<const detail::MatRM<Real>> wm(tw.data.data(), g.f, g.patch_rows());
    for (int s = 0; s < n; ++s) {
      Eigen::Map<const detail::MatRM<Real>> xm(tx.data.data() + s * in_stride, g.f, g.out_cols());
      detail::MatCM<Real> col = wm.transpose() * xm;
      Real* dst = out.data.data() + s * out_stride;
      detail::col2im(col, g, dst);
      for (int c = 0; c < g.in_c; ++c) {
        Real* plane = dst + static_cast<std::int64_t>(c) * g.in_h * g.in_w;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(g.in_h) * g.in_w; ++i) plane[i] += tb[c];
      }
    }

    return push(std::move(out), rg(x) || rg(w) || rg(b),
                [this, x, w, b, g, n, in_stride, out_stride](Node& nd) {
                  Eigen::Map<const detail::MatRM<Real>> wm(val(w).data.data(), g.f, g.patch_rows());
                  detail::MatCM<Real> gcol;
                  for (int s = 0; s < n; ++s) {
                    detail::im2col(nd.grad.data.data() + s * out_stride, g, gcol);
                    if (rg(x)) {
                      Eigen::Map<detail::MatRM<Real>> gx(mutable_grad(x).data.data() + s * in_stride, g.f,
                                                         g.out_cols());
                      gx.noalias() += wm * gcol;
                    }
                    if (rg(w)) {
                      Eigen::Map<const detail::MatRM<Real>> xm(val(x).data.data() + s * in_stride, g.f,
                                                               g.out_cols());
                      Eigen::Map<detail::MatRM<Real>> gw(mutable_grad(w).data.data(), g.f,
                                                         g.patch_rows());
                      gw.noalias() += xm * gcol.transpose();
                    }
                    if (rg(b)) {
                      auto& gb = mutable_grad(b);
                      const Real* gp = nd.grad.data.data() + s * out_stride;
                      for (int c = 0; c < g.in_c; ++c) {
                        Real acc = 0;
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(g.in_h) * g.in_w; ++i)
                          acc += gp[static_cast<std::int64_t>(c) * g.in_h * g.in_w + i];
                        gb[c] += acc;
                      }
                    }
                  }
                });
  }

  // 2x2 max pooling with stride 2; gradient routes to the argmax cell
  // (first occurrence on ties).
  Value max_pool2(Value x) {
    const auto& tx = val(x);
    if (tx.ndim() != 4) throw ValidationError("max_pool2: want [N,C,H,W], got " + tx.shape_str());
    const int n = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);
    if (h % 2 || w % 2)
      throw ValidationError("max_pool2: spatial dims must be even, got " + tx.shape_str());
    const int oh = h / 2, ow = w / 2;
    Tensor<Real> out({n, c, oh, ow});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
    std::int64_t o = 0;
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t base = (static_cast<std::int64_t>(s) * c + ch) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox, ++o) {
            Real best{};
            std::int64_t best_i = -1;
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const std::int64_t i = base + static_cast<std::int64_t>(2 * oy + dy) * w + (2 * ox + dx);
                if (best_i < 0 || tx[i] > best) {
                  best = tx[i];
                  best_i = i;
                }
              }
            }
            out[o] = best;
            (*argmax)[o] = best_i;
          }
        }
      }
    }
    return push(std::move(out), rg(x), [this, x, argmax](Node& nd) {
      if (!rg(x)) return;
      auto& gx = mutable_grad(x);
      for (std::int64_t i = 0; i < nd.grad.numel(); ++i) gx[(*argmax)[i]] += nd.grad[i];
    });
  }

  // nearest-neighbour 2x upsampling
  Value upsample2(Value x) {
    const auto& tx = val(x);
    if (tx.ndim() != 4) throw ValidationError("upsample2: want [N,C,H,W], got " + tx.shape_str());
    const int n = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);
    Tensor<Real> out({n, c, 2 * h, 2 * w});
    for (int s = 0; s < n; ++s)
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t ib = (static_cast<std::int64_t>(s) * c + ch) * h * w;
        const std::int64_t ob = (static_cast<std::int64_t>(s) * c + ch) * 4 * h * w;
        for (int y = 0; y < h; ++y)
          for (int x2 = 0; x2 < w; ++x2) {
            const Real v = tx[ib + static_cast<std::int64_t>(y) * w + x2];
            const std::int64_t o = ob + static_cast<std::int64_t>(2 * y) * 2 * w + 2 * x2;
            out[o] = v;
            out[o + 1] = v;
            out[o + 2 * w] = v;
            out[o + 2 * w + 1] = v;
          }
      }
    return push(std::move(out), rg(x), [this, x, n, c, h, w](Node& nd) {
      if (!rg(x)) return;
      auto& gx = mutable_grad(x);
      for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch) {
          const std::int64_t ib = (static_cast<std::int64_t>(s) * c + ch) * h * w;
          const std::int64_t ob = (static_cast<std::int64_t>(s) * c + ch) * 4 * h * w;
          for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < w; ++x2) {
              const std::int64_t o = ob + static_cast<std::int64_t>(2 * y) * 2 * w + 2 * x2;
              gx[ib + static_cast<std::int64_t>(y) * w + x2] +=
                  nd.grad[o] + nd.grad[o + 1] + nd.grad[o + 2 * w] + nd.grad[o + 2 * w + 1];
            }
        }
    });
  }

  // --- losses ------------------------------------------------------------------

  // mean squared error over all elements -> scalar [1]
  Value mse(Value pred, Value target) {
    const auto& tp = val(pred);
    const auto& tt = val(target);
    require_same_shape(tp, tt, "mse");
    const std::int64_t m = tp.numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double d = static_cast<double>(tp[i]) - static_cast<double>(tt[i]);
      acc += d * d;
    }
    Tensor<Real> out({1});
    out[0] = static_cast<Real>(acc / static_cast<double>(m));
    return push(std::move(out), rg(pred) || rg(target), [this, pred, target, m](Node& nd) {
      const Real g = nd.grad[0] * Real(2) / static_cast<Real>(m);
      const auto& tp = val(pred);
      const auto& tt = val(target);
      if (rg(pred)) {
        auto& gp = mutable_grad(pred);
        for (std::int64_t i = 0; i < m; ++i) gp[i] += g * (tp[i] - tt[i]);
      }
      if (rg(target)) {
        auto& gt = mutable_grad(target);
        for (std::int64_t i = 0; i < m; ++i) gt[i] -= g * (tp[i] - tt[i]);
      }
    });
  }

  // KL(q(z|x) || N(0,I)) for a diagonal Gaussian, mean over batch rows.
  Value kl_diag_gauss(Value mu, Value logvar) {
    const auto& tm = val(mu);
    const auto& tl = val(logvar);
    require_same_shape(tm, tl, "kl_diag_gauss");
    if (tm.ndim() != 2) throw ValidationError("kl_diag_gauss: want [N,D]");
    const int n = tm.dim(0);
    double acc = 0.0;
    for (std::int64_t i = 0; i < tm.numel(); ++i) {
      const double m = tm[i], lv = tl[i];
      acc += -0.5 * (1.0 + lv - m * m - std::exp(lv));
    }
    Tensor<Real> out({1});
    out[0] = static_cast<Real>(acc / n);
    return push(std::move(out), rg(mu) || rg(logvar), [this, mu, logvar, n](Node& nd) {
      const Real g = nd.grad[0] / static_cast<Real>(n);
      const auto& tm = val(mu);
      const auto& tl = val(logvar);
      if (rg(mu)) {
        auto& gm = mutable_grad(mu);
        for (std::int64_t i = 0; i < tm.numel(); ++i) gm[i] += g * tm[i];
      }
      if (rg(logvar)) {
        auto& gl = mutable_grad(logvar);
        for (std::int64_t i = 0; i < tl.numel(); ++i)
          gl[i] += g * Real(-0.5) * (Real(1) - std::exp(tl[i]));
      }
    });
  }

  void backward(Value loss) {
    Node& L = nodes_[check(loss)];
    if (L.value.numel() != 1) throw ValidationError("backward: loss must be scalar");
    L.grad.fill(Real(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back) n.back(n);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    std::function<void(Node&)> back;
  };

  Value push(Tensor<Real> v, bool requires_grad, std::function<void(Node&)> back) {
    Node n;
    n.grad = Tensor<Real>(v.shape);
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  int check(Value v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw ValidationError("invalid tape handle");
    return v.id;
  }

  const Tensor<Real>& val(Value v) const { return nodes_[check(v)].value; }
  bool rg(Value v) const { return nodes_[check(v)].requires_grad; }
  Tensor<Real>& mutable_grad(Value v) { return nodes_[check(v)].grad; }

  void accumulate(Value v, const Real* g, std::int64_t n) {
    if (!rg(v)) return;
    auto& gv = mutable_grad(v);
    for (std::int64_t i = 0; i < n; ++i) gv[i] += g[i];
  }

  void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) const {
    if (!same_shape(a, b))
      throw ValidationError(std::string(op) + ": shape mismatch, expected " + a.shape_str() + " got " +
                            b.shape_str());
  }

  std::vector<Node> nodes_;
};

}  // namespace vimp::nn
