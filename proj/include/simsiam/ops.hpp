#ifndef SIMSIAM_OPS_HPP
#define SIMSIAM_OPS_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "simsiam/tape.hpp"

namespace simsiam {

namespace detail {

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* who) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b, const char* who) {
  if (a.tape != b.tape) throw std::logic_error(std::string(who) + ": operands on different tapes");
}

template <typename Scalar>
void require_rank(const Var<Scalar>& v, Index r, const char* who) {
  if (v.value().rank() != r)
    throw ShapeError(std::string(who) + ": rank-" + std::to_string(r) + " operand required, got " +
                     shape_str(v.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b, "add");
  detail::require_same_shape(a, b, "add");
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out(a.shape(), a.value().flat() + b.value().flat());
  auto bw = [pa = a.id, pb = b.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, g);
    tp.accumulate(pb, g);
  };
  return t.emit(OpKind::add, {a.id, b.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b, "sub");
  detail::require_same_shape(a, b, "sub");
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out(a.shape(), a.value().flat() - b.value().flat());
  auto bw = [pa = a.id, pb = b.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, g);
    tp.accumulate(pb, Tensor<Scalar>(g.shape(), -g.flat()));
  };
  return t.emit(OpKind::sub, {a.id, b.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b, "mul");
  detail::require_same_shape(a, b, "mul");
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out(a.shape(), a.value().flat() * b.value().flat());
  auto bw = [pa = a.id, pb = b.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, Tensor<Scalar>(g.shape(), g.flat() * tp.value(pb).flat()));
    tp.accumulate(pb, Tensor<Scalar>(g.shape(), g.flat() * tp.value(pa).flat()));
  };
  return t.emit(OpKind::mul, {a.id, b.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, double alpha) {
  Tape<Scalar>& t = *a.tape;
  const Scalar c = static_cast<Scalar>(alpha);
  Tensor<Scalar> out(a.shape(), a.value().flat() * c);
  auto bw = [pa = a.id, c](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, Tensor<Scalar>(g.shape(), g.flat() * c));
  };
  return t.emit(OpKind::scale, {a.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, double alpha) {
  return scale(a, alpha);
}
template <typename Scalar>
Var<Scalar> operator*(double alpha, Var<Scalar> a) {
  return scale(a, alpha);
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out(a.shape(), a.value().flat().max(Scalar(0)));
  auto bw = [pa = a.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    const auto& x = tp.value(pa).flat();
    tp.accumulate(pa, Tensor<Scalar>(g.shape(), (x > Scalar(0))
                                                    .select(g.flat(), ArrayX<Scalar>::Zero(x.size()))));
  };
  return t.emit(OpKind::relu, {a.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out(a.shape(), a.value().flat().log());
  auto bw = [pa = a.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, Tensor<Scalar>(g.shape(), g.flat() / tp.value(pa).flat()));
  };
  return t.emit(OpKind::log, {a.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> a) {
  return a * a;
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out = Tensor<Scalar>::scalar(a.value().flat().sum());
  auto bw = [pa = a.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, Tensor<Scalar>::constant(tp.value(pa).shape(), g.value()));
  };
  return t.emit(OpKind::sum, {a.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  const Index n = a.value().numel();
  Tensor<Scalar> out = Tensor<Scalar>::scalar(a.value().flat().sum() / static_cast<Scalar>(n));
  auto bw = [pa = a.id, n](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(pa, Tensor<Scalar>::constant(tp.value(pa).shape(),
                                               g.value() / static_cast<Scalar>(n)));
  };
  return t.emit(OpKind::mean, {a.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> concat_rows(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b, "concat_rows");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty() ||
      !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1))
    throw ShapeError("concat_rows: trailing dims must match, " + shape_str(sa) + " vs " +
                     shape_str(sb));
  Shape so = sa;
  so[0] += sb[0];
  Tensor<Scalar> out(so);
  out.flat().head(a.value().numel()) = a.value().flat();
  out.flat().tail(b.value().numel()) = b.value().flat();
  Tape<Scalar>& t = *a.tape;
  auto bw = [pa = a.id, pb = b.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    const Index na = tp.value(pa).numel();
    const Index nb = tp.value(pb).numel();
    tp.accumulate(pa, Tensor<Scalar>(tp.value(pa).shape(), g.flat().head(na)));
    tp.accumulate(pb, Tensor<Scalar>(tp.value(pb).shape(), g.flat().tail(nb)));
  };
  return t.emit(OpKind::concat_rows, {a.id, b.id}, std::move(out), std::move(bw));
}

// Forward identity, zero gradient flow to ancestors.
template <typename Scalar>
Var<Scalar> stop_gradient(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Tensor<Scalar> out = t.sg_replaying() ? t.sg_next_replay(a.shape()) : a.value();
  t.sg_record(out);
  return t.emit(OpKind::stop_gradient, {a.id}, std::move(out), nullptr, /*grad_blocked=*/true);
}

// ---------------------------------------------------------------------------
// Linear algebra ops
// ---------------------------------------------------------------------------

// y = x w + b with x: n x in, w: in x out, b: out.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  detail::require_same_tape(x, w, "affine");
  detail::require_same_tape(x, b, "affine");
  detail::require_rank(x, 2, "affine(x)");
  detail::require_rank(w, 2, "affine(w)");
  detail::require_rank(b, 1, "affine(b)");
  const Index n = x.value().rows(), in = x.value().cols();
  const Index out_dim = w.value().cols();
  if (w.value().rows() != in)
    throw ShapeError("affine: x cols " + std::to_string(in) + " != w rows " +
                     std::to_string(w.value().rows()));
  if (b.value().numel() != out_dim)
    throw ShapeError("affine: bias size " + std::to_string(b.value().numel()) + " != w cols " +
                     std::to_string(out_dim));
  Tensor<Scalar> y({n, out_dim});
  y.mat().noalias() = x.value().mat() * w.value().mat();
  y.mat().rowwise() += ConstVecMap<Scalar>(b.value().data(), out_dim).transpose();
  Tape<Scalar>& t = *x.tape;
  auto bw = [px = x.id, pw = w.id, pb = b.id](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    auto G = g.mat();
    if (tp.requires_grad(px)) {
      Tensor<Scalar> gx(tp.value(px).shape());
      gx.mat().noalias() = G * tp.value(pw).mat().transpose();
      tp.accumulate(px, std::move(gx));
    }
    if (tp.requires_grad(pw)) {
      Tensor<Scalar> gw(tp.value(pw).shape());
      gw.mat().noalias() = tp.value(px).mat().transpose() * G;
      tp.accumulate(pw, std::move(gw));
    }
    if (tp.requires_grad(pb)) {
      Tensor<Scalar> gb(tp.value(pb).shape());
      VecMap<Scalar>(gb.data(), gb.numel()) = G.colwise().sum().transpose();
      tp.accumulate(pb, std::move(gb));
    }
  };
  return t.emit(OpKind::affine, {x.id, w.id, b.id}, std::move(y), std::move(bw));
}

// Rowwise l2 normalization over the last axis (rank-1 input is one row).
// Rows with norm <= eps are divided by eps, so the zero vector maps to the
// zero vector; collapse experiments intentionally drive norms small.
inline constexpr double kNormalizeEps = 1e-12;

template <typename Scalar>
Var<Scalar> l2_normalize(Var<Scalar> a) {
  const Index rank = a.value().rank();
  if (rank != 1 && rank != 2)
    throw ShapeError("l2_normalize: rank-1 or rank-2 operand required, got " +
                     shape_str(a.shape()));
  const Index rows = rank == 2 ? a.value().dim(0) : 1;
  const Index cols = rank == 2 ? a.value().dim(1) : a.value().numel();
  const Scalar eps = static_cast<Scalar>(kNormalizeEps);

  ArrayX<Scalar> norms = a.value().view2d(rows, cols).rowwise().norm();
  Tensor<Scalar> out(a.shape());
  {
    auto Y = out.view2d(rows, cols);
    Y = (a.value().view2d(rows, cols).array().colwise() / norms.max(eps)).matrix();
  }
  Tensor<Scalar> y_saved = out;

  Tape<Scalar>& t = *a.tape;
  auto bw = [pa = a.id, norms = std::move(norms), y = std::move(y_saved), rows, cols,
             eps](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    Tensor<Scalar> gx(g.shape());
    auto GX = gx.view2d(rows, cols);
    auto G = g.view2d(rows, cols);
    auto Y = y.view2d(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      if (norms[r] > eps) {
        const Scalar dot = G.row(r).dot(Y.row(r));
        GX.row(r) = (G.row(r) - dot * Y.row(r)) / norms[r];
      } else {
        GX.row(r) = G.row(r) / eps;
      }
    }
    tp.accumulate(pa, std::move(gx));
  };
  return t.emit(OpKind::l2_normalize, {a.id}, std::move(out), std::move(bw));
}

// Rowwise softmax over the last axis (channel dimension).
template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> a) {
  detail::require_rank(a, 2, "softmax");
  auto X = a.value().arr();
  Tensor<Scalar> out(a.shape());
  {
    auto S = out.arr();
    S = (X.colwise() - X.rowwise().maxCoeff()).exp();
    S.colwise() /= S.rowwise().sum();
  }
  Tensor<Scalar> s_saved = out;
  Tape<Scalar>& t = *a.tape;
  auto bw = [pa = a.id, s = std::move(s_saved)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    auto S = s.arr();
    auto G = g.arr();
    Tensor<Scalar> gx(g.shape());
    ArrayX<Scalar> dot = (G * S).rowwise().sum();
    gx.arr() = S * (G.colwise() - dot);
    tp.accumulate(pa, std::move(gx));
  };
  return t.emit(OpKind::softmax, {a.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> log_softmax(Var<Scalar> a) {
  detail::require_rank(a, 2, "log_softmax");
  auto X = a.value().arr();
  Tensor<Scalar> out(a.shape());
  {
    auto L = out.arr();
    ArrayRR<Scalar> shifted = X.colwise() - X.rowwise().maxCoeff();
    ArrayX<Scalar> lse = shifted.exp().rowwise().sum().log();
    L = shifted.colwise() - lse;
  }
  Tensor<Scalar> l_saved = out;
  Tape<Scalar>& t = *a.tape;
  auto bw = [pa = a.id, l = std::move(l_saved)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    auto G = g.arr();
    Tensor<Scalar> gx(g.shape());
    ArrayX<Scalar> gsum = G.rowwise().sum();
    gx.arr() = G - l.arr().exp().colwise() * gsum;
    tp.accumulate(pa, std::move(gx));
  };
  return t.emit(OpKind::log_softmax, {a.id}, std::move(out), std::move(bw));
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BatchNormState {
  Tensor<Scalar> running_mean;  // shape {C}
  Tensor<Scalar> running_var;   // shape {C}

  explicit BatchNormState(Index channels)
      : running_mean(Tensor<Scalar>::zeros({channels})),
        running_var(Tensor<Scalar>::ones({channels})) {}
};

namespace detail {

// Shared implementation; gamma/beta absent when affine is disabled. Train
// mode normalizes by batch statistics (biased variance) and differentiates
// through them; eval mode uses the running statistics as constants. Running
// variance is updated with the unbiased estimate.
template <typename Scalar>
Var<Scalar> batchnorm_impl(Var<Scalar> x, std::optional<Var<Scalar>> gamma,
                           std::optional<Var<Scalar>> beta, BatchNormState<Scalar>& state,
                           Mode mode, Scalar momentum, Scalar eps) {
  require_rank(x, 2, "batchnorm");
  const Index n = x.value().rows(), c = x.value().cols();
  if (state.running_mean.numel() != c)
    throw ShapeError("batchnorm: state has " + std::to_string(state.running_mean.numel()) +
                     " channels, input has " + std::to_string(c));
  const bool affine = gamma.has_value();
  if (affine && (gamma->value().numel() != c || beta->value().numel() != c))
    throw ShapeError("batchnorm: affine parameter size mismatch");

  auto X = x.value().arr();
  ArrayX<Scalar> mu(c), inv_std(c);
  if (mode == Mode::train) {
    if (n < 2)
      throw std::invalid_argument("batchnorm: train mode requires batch size >= 2, got " +
                                  std::to_string(n));
    mu = X.colwise().mean();
    ArrayX<Scalar> var = (X.rowwise() - mu.transpose()).square().colwise().mean();
    inv_std = (var + eps).rsqrt();
    ArrayX<Scalar> var_unbiased = var * static_cast<Scalar>(n) / static_cast<Scalar>(n - 1);
    state.running_mean.flat() = (Scalar(1) - momentum) * state.running_mean.flat() + momentum * mu;
    state.running_var.flat() =
        (Scalar(1) - momentum) * state.running_var.flat() + momentum * var_unbiased;
  } else {
    mu = state.running_mean.flat();
    inv_std = (state.running_var.flat() + eps).rsqrt();
  }

  Tensor<Scalar> xhat({n, c});
  xhat.arr() = (X.rowwise() - mu.transpose()).rowwise() * inv_std.transpose();
  Tensor<Scalar> out({n, c});
  if (affine) {
    out.arr() = xhat.arr().rowwise() * gamma->value().flat().transpose();
    out.arr().rowwise() += beta->value().flat().transpose();
  } else {
    out.flat() = xhat.flat();
  }

  std::vector<std::int32_t> parents{x.id};
  if (affine) {
    parents.push_back(gamma->id);
    parents.push_back(beta->id);
  }
  Tape<Scalar>& t = *x.tape;
  const std::int32_t px = x.id;
  const std::int32_t pg = affine ? gamma->id : -1;
  const std::int32_t pb = affine ? beta->id : -1;
  const bool train = mode == Mode::train;
  auto bw = [px, pg, pb, affine, train, n, c, inv_std = std::move(inv_std),
             xhat = std::move(xhat)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    auto G = g.arr();
    auto XH = xhat.arr();
    if (affine) {
      if (tp.requires_grad(pg)) {
        Tensor<Scalar> gg({c});
        gg.flat() = (G * XH).colwise().sum();
        tp.accumulate(pg, std::move(gg));
      }
      if (tp.requires_grad(pb)) {
        Tensor<Scalar> gb({c});
        gb.flat() = G.colwise().sum();
        tp.accumulate(pb, std::move(gb));
      }
    }
    if (!tp.requires_grad(px)) return;
    ArrayX<Scalar> gscale =
        affine ? ArrayX<Scalar>(tp.value(pg).flat() * inv_std) : inv_std;
    Tensor<Scalar> gx({n, c});
    if (train) {
      // Full rule: differentiate through the batch statistics.
      ArrayX<Scalar> gmean = G.colwise().mean();
      ArrayX<Scalar> gdot = (G * XH).colwise().mean();
      gx.arr() = (((G.rowwise() - gmean.transpose()) - XH.rowwise() * gdot.transpose()).rowwise() *
                  gscale.transpose());
    } else {
      gx.arr() = G.rowwise() * gscale.transpose();
    }
    tp.accumulate(px, std::move(gx));
  };
  return t.emit(OpKind::batchnorm, std::move(parents), std::move(out), std::move(bw));
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> batchnorm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta,
                      BatchNormState<Scalar>& state, Mode mode, Scalar momentum = Scalar(0.1),
                      Scalar eps = Scalar(1e-5)) {
  return detail::batchnorm_impl<Scalar>(x, gamma, beta, state, mode, momentum, eps);
}

template <typename Scalar>
Var<Scalar> batchnorm(Var<Scalar> x, BatchNormState<Scalar>& state, Mode mode,
                      Scalar momentum = Scalar(0.1), Scalar eps = Scalar(1e-5)) {
  return detail::batchnorm_impl<Scalar>(x, std::nullopt, std::nullopt, state, mode, momentum, eps);
}

// ---------------------------------------------------------------------------
// Convolution ops (minimal, for the small image encoder)
// ---------------------------------------------------------------------------

namespace detail {

struct ConvDims {
  Index n, c, h, w, oc, kh, kw, oh, ow;
  int stride, pad;
};

// Gathers the receptive fields of one sample into (C*kh*kw) x (OH*OW).
template <typename Scalar>
void im2col(const Tensor<Scalar>& x, Index sample, const ConvDims& d, MatrixR<Scalar>& cols) {
  cols.setZero(d.c * d.kh * d.kw, d.oh * d.ow);
  const Scalar* base = x.data() + sample * d.c * d.h * d.w;
  for (Index c = 0; c < d.c; ++c)
    for (Index ki = 0; ki < d.kh; ++ki)
      for (Index kj = 0; kj < d.kw; ++kj) {
        const Index row = (c * d.kh + ki) * d.kw + kj;
        for (Index oi = 0; oi < d.oh; ++oi) {
          const Index ii = oi * d.stride + ki - d.pad;
          if (ii < 0 || ii >= d.h) continue;
          for (Index oj = 0; oj < d.ow; ++oj) {
            const Index jj = oj * d.stride + kj - d.pad;
            if (jj < 0 || jj >= d.w) continue;
            cols(row, oi * d.ow + oj) = base[(c * d.h + ii) * d.w + jj];
          }
        }
      }
}

template <typename Scalar>
void col2im_add(const MatrixR<Scalar>& cols, Index sample, const ConvDims& d, Tensor<Scalar>& gx) {
  Scalar* base = gx.data() + sample * d.c * d.h * d.w;
  for (Index c = 0; c < d.c; ++c)
    for (Index ki = 0; ki < d.kh; ++ki)
      for (Index kj = 0; kj < d.kw; ++kj) {
        const Index row = (c * d.kh + ki) * d.kw + kj;
        for (Index oi = 0; oi < d.oh; ++oi) {
          const Index ii = oi * d.stride + ki - d.pad;
          if (ii < 0 || ii >= d.h) continue;
          for (Index oj = 0; oj < d.ow; ++oj) {
            const Index jj = oj * d.stride + kj - d.pad;
            if (jj < 0 || jj >= d.w) continue;
            base[(c * d.h + ii) * d.w + jj] += cols(row, oi * d.ow + oj);
          }
        }
      }
}

}  // namespace detail

// x: N,C,H,W; w: OC,C,kh,kw; b: OC.
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b, int stride = 1, int pad = 0) {
  detail::require_rank(x, 4, "conv2d(x)");
  detail::require_rank(w, 4, "conv2d(w)");
  detail::require_rank(b, 1, "conv2d(b)");
  detail::ConvDims d{};
  d.n = x.value().dim(0);
  d.c = x.value().dim(1);
  d.h = x.value().dim(2);
  d.w = x.value().dim(3);
  d.oc = w.value().dim(0);
  d.kh = w.value().dim(2);
  d.kw = w.value().dim(3);
  d.stride = stride;
  d.pad = pad;
  if (w.value().dim(1) != d.c)
    throw ShapeError("conv2d: weight expects " + std::to_string(w.value().dim(1)) +
                     " input channels, input has " + std::to_string(d.c));
  if (b.value().numel() != d.oc) throw ShapeError("conv2d: bias size != output channels");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.oh < 1 || d.ow < 1) throw ShapeError("conv2d: kernel larger than padded input");

  Tensor<Scalar> out({d.n, d.oc, d.oh, d.ow});
  {
    auto W = w.value().view2d(d.oc, d.c * d.kh * d.kw);
    auto bias = ConstVecMap<Scalar>(b.value().data(), d.oc);
    MatrixR<Scalar> cols;
    for (Index s = 0; s < d.n; ++s) {
      detail::im2col(x.value(), s, d, cols);
      MatMap<Scalar> O(out.data() + s * d.oc * d.oh * d.ow, d.oc, d.oh * d.ow);
      O.noalias() = W * cols;
      O.colwise() += bias;
    }
  }

  Tape<Scalar>& t = *x.tape;
  auto bw = [px = x.id, pw = w.id, pb = b.id, d](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    auto W = tp.value(pw).view2d(d.oc, d.c * d.kh * d.kw);
    const bool need_x = tp.requires_grad(px);
    const bool need_w = tp.requires_grad(pw);
    const bool need_b = tp.requires_grad(pb);
    Tensor<Scalar> gx = need_x ? Tensor<Scalar>::zeros(tp.value(px).shape()) : Tensor<Scalar>();
    Tensor<Scalar> gw = need_w ? Tensor<Scalar>::zeros(tp.value(pw).shape()) : Tensor<Scalar>();
    Tensor<Scalar> gb = need_b ? Tensor<Scalar>::zeros({d.oc}) : Tensor<Scalar>();
    MatrixR<Scalar> cols, gcols;
    for (Index s = 0; s < d.n; ++s) {
      ConstMatMap<Scalar> G(g.data() + s * d.oc * d.oh * d.ow, d.oc, d.oh * d.ow);
      if (need_w) {
        detail::im2col(tp.value(px), s, d, cols);
        gw.view2d(d.oc, d.c * d.kh * d.kw).noalias() += G * cols.transpose();
      }
      if (need_b) gb.flat() += G.rowwise().sum().array();
      if (need_x) {
        gcols.noalias() = W.transpose() * G;
        detail::col2im_add(gcols, s, d, gx);
      }
    }
    if (need_x) tp.accumulate(px, std::move(gx));
    if (need_w) tp.accumulate(pw, std::move(gw));
    if (need_b) tp.accumulate(pb, std::move(gb));
  };
  return t.emit(OpKind::conv2d, {x.id, w.id, b.id}, std::move(out), std::move(bw));
}

// Non-overlapping k x k average pooling; H and W must be divisible by k.
template <typename Scalar>
Var<Scalar> avg_pool2d(Var<Scalar> x, int k) {
  detail::require_rank(x, 4, "avg_pool2d");
  const Index n = x.value().dim(0), c = x.value().dim(1);
  const Index h = x.value().dim(2), w = x.value().dim(3);
  if (k < 1 || h % k != 0 || w % k != 0)
    throw ShapeError("avg_pool2d: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by k=" + std::to_string(k));
  const Index oh = h / k, ow = w / k;
  Tensor<Scalar> out({n, c, oh, ow});
  const Scalar inv = Scalar(1) / static_cast<Scalar>(k * k);
  for (Index nc = 0; nc < n * c; ++nc) {
    ConstMatMap<Scalar> X(x.value().data() + nc * h * w, h, w);
    MatMap<Scalar> O(out.data() + nc * oh * ow, oh, ow);
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) O(i, j) = X.block(i * k, j * k, k, k).sum() * inv;
  }
  Tape<Scalar>& t = *x.tape;
  auto bw = [px = x.id, n, c, h, w, oh, ow, k, inv](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    Tensor<Scalar> gx(tp.value(px).shape());
    for (Index nc = 0; nc < n * c; ++nc) {
      ConstMatMap<Scalar> G(g.data() + nc * oh * ow, oh, ow);
      MatMap<Scalar> GX(gx.data() + nc * h * w, h, w);
      for (Index i = 0; i < oh; ++i)
        for (Index j = 0; j < ow; ++j) GX.block(i * k, j * k, k, k).setConstant(G(i, j) * inv);
    }
    tp.accumulate(px, std::move(gx));
  };
  return t.emit(OpKind::avg_pool2d, {x.id}, std::move(out), std::move(bw));
}

// N,C,H,W -> N,C (mean over the spatial dims).
template <typename Scalar>
Var<Scalar> global_avg_pool(Var<Scalar> x) {
  detail::require_rank(x, 4, "global_avg_pool");
  const Index n = x.value().dim(0), c = x.value().dim(1);
  const Index hw = x.value().dim(2) * x.value().dim(3);
  Tensor<Scalar> out({n, c});
  out.flat() = x.value().view2d(n * c, hw).rowwise().mean().array();
  Tape<Scalar>& t = *x.tape;
  auto bw = [px = x.id, n, c, hw](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    Tensor<Scalar> gx(tp.value(px).shape());
    gx.view2d(n * c, hw).colwise() = (g.flat() / static_cast<Scalar>(hw)).matrix();
    tp.accumulate(px, std::move(gx));
  };
  return t.emit(OpKind::global_avg_pool, {x.id}, std::move(out), std::move(bw));
}

// N,C,H,W -> (N*H*W) x C; lets the 2-d batchnorm act per channel on conv
// activations. Pure permutation, backward is the inverse permutation.
template <typename Scalar>
Var<Scalar> nchw_to_rows(Var<Scalar> x) {
  detail::require_rank(x, 4, "nchw_to_rows");
  const Index n = x.value().dim(0), c = x.value().dim(1);
  const Index hw = x.value().dim(2) * x.value().dim(3);
  Tensor<Scalar> out({n * hw, c});
  for (Index s = 0; s < n; ++s) {
    ConstMatMap<Scalar> X(x.value().data() + s * c * hw, c, hw);
    MatMap<Scalar> O(out.data() + s * hw * c, hw, c);
    O = X.transpose();
  }
  Tape<Scalar>& t = *x.tape;
  auto bw = [px = x.id, n, c, hw](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    Tensor<Scalar> gx(tp.value(px).shape());
    for (Index s = 0; s < n; ++s) {
      ConstMatMap<Scalar> G(g.data() + s * hw * c, hw, c);
      MatMap<Scalar> GX(gx.data() + s * c * hw, c, hw);
      GX = G.transpose();
    }
    tp.accumulate(px, std::move(gx));
  };
  return t.emit(OpKind::nchw_to_rows, {x.id}, std::move(out), std::move(bw));
}

template <typename Scalar>
Var<Scalar> rows_to_nchw(Var<Scalar> x, const Shape& nchw) {
  detail::require_rank(x, 2, "rows_to_nchw");
  if (nchw.size() != 4) throw ShapeError("rows_to_nchw: target shape must be rank 4");
  const Index n = nchw[0], c = nchw[1], hw = nchw[2] * nchw[3];
  if (x.value().rows() != n * hw || x.value().cols() != c)
    throw ShapeError("rows_to_nchw: input " + shape_str(x.shape()) + " does not match target " +
                     shape_str(nchw));
  Tensor<Scalar> out(nchw);
  for (Index s = 0; s < n; ++s) {
    ConstMatMap<Scalar> X(x.value().data() + s * hw * c, hw, c);
    MatMap<Scalar> O(out.data() + s * c * hw, c, hw);
    O = X.transpose();
  }
  Tape<Scalar>& t = *x.tape;
  auto bw = [px = x.id, n, c, hw](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    Tensor<Scalar> gx(tp.value(px).shape());
    for (Index s = 0; s < n; ++s) {
      ConstMatMap<Scalar> G(g.data() + s * c * hw, c, hw);
      MatMap<Scalar> GX(gx.data() + s * hw * c, hw, c);
      GX = G.transpose();
    }
    tp.accumulate(px, std::move(gx));
  };
  return t.emit(OpKind::rows_to_nchw, {x.id}, std::move(out), std::move(bw));
}

}  // namespace simsiam

#endif  // SIMSIAM_OPS_HPP
