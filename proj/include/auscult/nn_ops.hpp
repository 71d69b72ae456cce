#pragma once

#include "auscult/tensor.hpp"

namespace auscult {

// Neural-network ops on [batch, channel, frequency, time] activations.

struct Pad2d {
  int top = 0, bottom = 0, left = 0, right = 0;
};

// "same" padding for stride 1; even kernels pad one less on the leading side
inline Pad2d same_pad(int kh, int kw) {
  Pad2d p;
  p.top = (kh - 1) / 2;
  p.bottom = kh - 1 - p.top;
  p.left = (kw - 1) / 2;
  p.right = kw - 1 - p.left;
  return p;
}

namespace detail {

// im2col patch matrix, row-major [IC*KH*KW x OH*OW], one item at a time.
// Row (ic,kh,kw) holds the shifted input window; zero where padding applies.
template <typename T>
void im2col(const T* x, int IC, int H, int W, int KH, int KW, const Pad2d& pad,
            int OH, int OW, T* out) {
  for (int ic = 0; ic < IC; ++ic)
    for (int kh = 0; kh < KH; ++kh)
      for (int kw = 0; kw < KW; ++kw) {
        T* row = out + (int64_t(ic) * KH * KW + kh * KW + kw) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
          int ih = oh + kh - pad.top;
          T* dst = row + int64_t(oh) * OW;
          if (ih < 0 || ih >= H) {
            std::fill_n(dst, OW, T(0));
            continue;
          }
          const T* src = x + (int64_t(ic) * H + ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            int iw = ow + kw - pad.left;
            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const T* cols, int IC, int H, int W, int KH, int KW,
                const Pad2d& pad, int OH, int OW, T* gx) {
  for (int ic = 0; ic < IC; ++ic)
    for (int kh = 0; kh < KH; ++kh)
      for (int kw = 0; kw < KW; ++kw) {
        const T* row = cols + (int64_t(ic) * KH * KW + kh * KW + kw) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
          int ih = oh + kh - pad.top;
          if (ih < 0 || ih >= H) continue;
          T* dst = gx + (int64_t(ic) * H + ih) * W;
          const T* src = row + int64_t(oh) * OW;
          for (int ow = 0; ow < OW; ++ow) {
            int iw = ow + kw - pad.left;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
}

}  // namespace detail

// 2-D convolution, stride 1, explicit padding. x [B,IC,H,W], w [OC,IC,KH,KW],
// b [OC]. The im2col buffer is rebuilt in the backward pass instead of being
// retained, trading FLOPs for memory.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const Pad2d& pad) {
  require(x.ndim() == 4 && w.ndim() == 4, "conv2d: expects 4-D input and kernel");
  require(x.dim(1) == w.dim(1), "conv2d: channel mismatch");
  int B = x.dim(0), IC = x.dim(1), H = x.dim(2), W = x.dim(3);
  int OC = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  require(b.ndim() == 1 && b.dim(0) == OC, "conv2d: bias length mismatch");
  int OH = H + pad.top + pad.bottom - KH + 1;
  int OW = W + pad.left + pad.right - KW + 1;
  require(OH > 0 && OW > 0, "conv2d: kernel larger than padded input");
  int64_t K = int64_t(IC) * KH * KW, N = int64_t(OH) * OW;

  auto n = detail::make_node<T>(Shape{B, OC, OH, OW}, {x.node(), w.node(), b.node()});
  std::vector<T> cols(size_t(K * N));
  for (int item = 0; item < B; ++item) {
    detail::im2col(x.data().data() + int64_t(item) * IC * H * W, IC, H, W, KH, KW,
                   pad, OH, OW, cols.data());
    detail::Map<T>(n->value.data() + int64_t(item) * OC * N, OC, N).noalias() =
        detail::CMap<T>(w.data().data(), OC, K) * detail::CMap<T>(cols.data(), K, N);
  }
  for (int item = 0; item < B; ++item)
    for (int oc = 0; oc < OC; ++oc) {
      T* dst = n->value.data() + (int64_t(item) * OC + oc) * N;
      T bias = b.data()[size_t(oc)];
      for (int64_t i = 0; i < N; ++i) dst[i] += bias;
    }

  n->backward_fn = [B, IC, H, W, OC, KH, KW, pad, OH, OW, K, N](Node<T>& self) {
    auto* gx = detail::gbuf(self.parents[0]);
    auto* gw = detail::gbuf(self.parents[1]);
    auto* gb = detail::gbuf(self.parents[2]);
    const auto& xv = self.parents[0]->value;
    const auto& wv = self.parents[1]->value;
    std::vector<T> cols(size_t(K * N)), dcols;
    if (gx) dcols.resize(size_t(K * N));
    for (int item = 0; item < B; ++item) {
      detail::CMap<T> g(self.grad.data() + int64_t(item) * OC * N, OC, N);
      if (gw || gx)
        detail::im2col(xv.data() + int64_t(item) * IC * H * W, IC, H, W, KH, KW, pad,
                       OH, OW, cols.data());
      if (gw)
        detail::Map<T>(gw->data(), OC, K).noalias() +=
            g * detail::CMap<T>(cols.data(), K, N).transpose();
      if (gx) {
        detail::Map<T>(dcols.data(), K, N).noalias() =
            detail::CMap<T>(wv.data(), OC, K).transpose() * g;
        detail::col2im_add(dcols.data(), IC, H, W, KH, KW, pad, OH, OW,
                           gx->data() + int64_t(item) * IC * H * W);
      }
      if (gb)
        for (int oc = 0; oc < OC; ++oc) {
          T acc = 0;
          const T* src = self.grad.data() + (int64_t(item) * OC + oc) * N;
          for (int64_t i = 0; i < N; ++i) acc += src[i];
          (*gb)[size_t(oc)] += acc;
        }
    }
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return conv2d(x, w, b, same_pad(w.dim(2), w.dim(3)));
}

// Non-overlapping pooling, stride == kernel, trailing remainder dropped.
template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, int kh, int kw) {
  require(x.ndim() == 4, "avg_pool: expects 4-D input");
  int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  int OH = H / kh, OW = W / kw;
  require(OH > 0 && OW > 0, "avg_pool: kernel larger than input");
  if (kh == 1 && kw == 1) return x;  // shape-preserving identity
  auto n = detail::make_node<T>(Shape{B, C, OH, OW}, {x.node()});
  T inv = T(1) / T(kh * kw);
  for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
    const T* src = x.data().data() + bc * H * W;
    T* dst = n->value.data() + bc * OH * OW;
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        T acc = 0;
        for (int i = 0; i < kh; ++i)
          for (int j = 0; j < kw; ++j) acc += src[(oh * kh + i) * W + ow * kw + j];
        dst[oh * OW + ow] = acc * inv;
      }
  }
  n->backward_fn = [B, C, H, W, OH, OW, kh, kw, inv](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
        T* dst = g->data() + bc * H * W;
        const T* src = self.grad.data() + bc * OH * OW;
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T v = src[oh * OW + ow] * inv;
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) dst[(oh * kh + i) * W + ow * kw + j] += v;
          }
      }
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> max_pool(const Tensor<T>& x, int kh, int kw) {
  require(x.ndim() == 4, "max_pool: expects 4-D input");
  int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  int OH = H / kh, OW = W / kw;
  require(OH > 0 && OW > 0, "max_pool: kernel larger than input");
  auto n = detail::make_node<T>(Shape{B, C, OH, OW}, {x.node()});
  auto argmax = std::make_shared<std::vector<int64_t>>(n->value.size());
  for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
    const T* src = x.data().data() + bc * H * W;
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        int64_t best = (int64_t(oh) * kh) * W + ow * kw;
        T bv = src[best];
        for (int i = 0; i < kh; ++i)
          for (int j = 0; j < kw; ++j) {
            int64_t idx = (int64_t(oh * kh + i)) * W + ow * kw + j;
            if (src[idx] > bv) {
              bv = src[idx];
              best = idx;
            }
          }
        int64_t out_idx = bc * OH * OW + oh * OW + ow;
        n->value[size_t(out_idx)] = bv;
        (*argmax)[size_t(out_idx)] = bc * H * W + best;
      }
  }
  n->backward_fn = [argmax](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i)
        (*g)[size_t((*argmax)[i])] += self.grad[i];
  };
  return Tensor<T>(n);
}

// fully connected: x [B,Din] * w [Din,Dout] + b
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_rowvec(matmul(x, w), b);
}

// numerically guarded softmax along an axis; rows are strictly positive
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  int64_t outer, len, inner;
  detail::axis_extents(x.shape(), axis, outer, len, inner);
  auto n = detail::make_node<T>(x.shape(), {x.node()});
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      T mx = x.data()[size_t(o * len * inner + i)];
      for (int64_t k = 1; k < len; ++k)
        mx = std::max(mx, x.data()[size_t((o * len + k) * inner + i)]);
      T denom = 0;
      for (int64_t k = 0; k < len; ++k) {
        T e = std::exp(x.data()[size_t((o * len + k) * inner + i)] - mx);
        n->value[size_t((o * len + k) * inner + i)] = e;
        denom += e;
      }
      for (int64_t k = 0; k < len; ++k)
        n->value[size_t((o * len + k) * inner + i)] /= denom;
    }
  n->backward_fn = [outer, len, inner](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
          T dot = 0;
          for (int64_t k = 0; k < len; ++k) {
            size_t idx = size_t((o * len + k) * inner + i);
            dot += self.grad[idx] * self.value[idx];
          }
          for (int64_t k = 0; k < len; ++k) {
            size_t idx = size_t((o * len + k) * inner + i);
            (*g)[idx] += self.value[idx] * (self.grad[idx] - dot);
          }
        }
  };
  return Tensor<T>(n);
}

// inverted dropout; identity in eval mode or at p == 0
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool train) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (!train || p == 0.0) return x;
  auto mask = std::make_shared<std::vector<T>>(x.data().size());
  std::bernoulli_distribution keep(1.0 - p);
  T inv = T(1.0 / (1.0 - p));
  for (auto& m : *mask) m = keep(rng) ? inv : T(0);
  auto n = detail::make_node<T>(x.shape(), {x.node()});
  for (size_t i = 0; i < n->value.size(); ++i)
    n->value[i] = x.data()[i] * (*mask)[i];
  n->backward_fn = [mask](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i)
        (*g)[i] += self.grad[i] * (*mask)[i];
  };
  return Tensor<T>(n);
}

// Running statistics owned by a BatchNorm layer; plain buffers, not part of
// the autodiff graph.
template <typename T>
struct BnStats {
  std::vector<T> mean, var;
  void init(int channels) {
    mean.assign(size_t(channels), T(0));
    var.assign(size_t(channels), T(1));
  }
};

// Batch normalization over axis 1 (channels for 4-D input, features for 2-D).
// Train mode normalizes with batch statistics and updates the running ones.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BnStats<T>& stats, bool train, T momentum = T(0.9),
                     T eps = T(1e-5)) {
  require(x.ndim() == 2 || x.ndim() == 4, "batch_norm: expects 2-D or 4-D input");
  int C = x.dim(1);
  require(gamma.size() == C && beta.size() == C && int(stats.mean.size()) == C,
          "batch_norm: parameter size mismatch");
  int64_t B = x.dim(0);
  int64_t spatial = x.size() / (B * C);
  int64_t cnt = B * spatial;
  auto n = detail::make_node<T>(x.shape(), {x.node(), gamma.node(), beta.node()});

  auto mu = std::make_shared<std::vector<T>>(size_t(C));
  auto ivstd = std::make_shared<std::vector<T>>(size_t(C));
  auto at = [C, spatial](int64_t b, int c, int64_t s) {
    return size_t((b * C + c) * spatial + s);
  };
  for (int c = 0; c < C; ++c) {
    T m, v;
    if (train) {
      T acc = 0;
      for (int64_t b = 0; b < B; ++b)
        for (int64_t s = 0; s < spatial; ++s) acc += x.data()[at(b, c, s)];
      m = acc / T(cnt);
      T vacc = 0;
      for (int64_t b = 0; b < B; ++b)
        for (int64_t s = 0; s < spatial; ++s) {
          T d = x.data()[at(b, c, s)] - m;
          vacc += d * d;
        }
      v = vacc / T(cnt);
      stats.mean[size_t(c)] = momentum * stats.mean[size_t(c)] + (1 - momentum) * m;
      stats.var[size_t(c)] = momentum * stats.var[size_t(c)] + (1 - momentum) * v;
    } else {
      m = stats.mean[size_t(c)];
      v = stats.var[size_t(c)];
    }
    (*mu)[size_t(c)] = m;
    (*ivstd)[size_t(c)] = T(1) / std::sqrt(v + eps);
    T g = gamma.data()[size_t(c)], bta = beta.data()[size_t(c)];
    for (int64_t b = 0; b < B; ++b)
      for (int64_t s = 0; s < spatial; ++s) {
        size_t i = at(b, c, s);
        n->value[i] = g * (x.data()[i] - m) * (*ivstd)[size_t(c)] + bta;
      }
  }

  n->backward_fn = [B, C, spatial, cnt, mu, ivstd, train, at](Node<T>& self) {
    auto* gx = detail::gbuf(self.parents[0]);
    auto* gg = detail::gbuf(self.parents[1]);
    auto* gb = detail::gbuf(self.parents[2]);
    const auto& xv = self.parents[0]->value;
    const auto& gammav = self.parents[1]->value;
    for (int c = 0; c < C; ++c) {
      T m = (*mu)[size_t(c)], iv = (*ivstd)[size_t(c)], gam = gammav[size_t(c)];
      T sum_dy = 0, sum_dy_xhat = 0;
      for (int64_t b = 0; b < B; ++b)
        for (int64_t s = 0; s < spatial; ++s) {
          size_t i = at(b, c, s);
          T xhat = (xv[i] - m) * iv;
          sum_dy += self.grad[i];
          sum_dy_xhat += self.grad[i] * xhat;
        }
      if (gb) (*gb)[size_t(c)] += sum_dy;
      if (gg) (*gg)[size_t(c)] += sum_dy_xhat;
      if (gx) {
        if (train) {
          for (int64_t b = 0; b < B; ++b)
            for (int64_t s = 0; s < spatial; ++s) {
              size_t i = at(b, c, s);
              T xhat = (xv[i] - m) * iv;
              (*gx)[i] += gam * iv *
                          (self.grad[i] - sum_dy / T(cnt) - xhat * sum_dy_xhat / T(cnt));
            }
        } else {
          for (int64_t b = 0; b < B; ++b)
            for (int64_t s = 0; s < spatial; ++s) {
              size_t i = at(b, c, s);
              (*gx)[i] += gam * iv * self.grad[i];
            }
        }
      }
    }
  };
  return Tensor<T>(n);
}

// Per-(item, frequency-bin) normalization over channel x time; no affine part.
template <typename T>
Tensor<T> instance_norm_freq(const Tensor<T>& x, T eps = T(1e-5)) {
  require(x.ndim() == 4, "instance_norm_freq: expects [B,C,F,T]");
  int B = x.dim(0), C = x.dim(1), F = x.dim(2), L = x.dim(3);
  int64_t cnt = int64_t(C) * L;
  auto n = detail::make_node<T>(x.shape(), {x.node()});
  auto mu = std::make_shared<std::vector<T>>(size_t(B) * F);
  auto ivstd = std::make_shared<std::vector<T>>(size_t(B) * F);
  auto at = [C, F, L](int b, int c, int f, int t) {
    return size_t(((int64_t(b) * C + c) * F + f) * L + t);
  };
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f) {
      T acc = 0;
      for (int c = 0; c < C; ++c)
        for (int t = 0; t < L; ++t) acc += x.data()[at(b, c, f, t)];
      T m = acc / T(cnt);
      T vacc = 0;
      for (int c = 0; c < C; ++c)
        for (int t = 0; t < L; ++t) {
          T d = x.data()[at(b, c, f, t)] - m;
          vacc += d * d;
        }
      T iv = T(1) / std::sqrt(vacc / T(cnt) + eps);
      (*mu)[size_t(b) * F + f] = m;
      (*ivstd)[size_t(b) * F + f] = iv;
      for (int c = 0; c < C; ++c)
        for (int t = 0; t < L; ++t) {
          size_t i = at(b, c, f, t);
          n->value[i] = (x.data()[i] - m) * iv;
        }
    }
  n->backward_fn = [B, C, F, L, cnt, mu, ivstd, at](Node<T>& self) {
    if (auto* gx = detail::gbuf(self.parents[0])) {
      const auto& xv = self.parents[0]->value;
      for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) {
          T m = (*mu)[size_t(b) * F + f], iv = (*ivstd)[size_t(b) * F + f];
          T sum_dy = 0, sum_dy_xhat = 0;
          for (int c = 0; c < C; ++c)
            for (int t = 0; t < L; ++t) {
              size_t i = at(b, c, f, t);
              T xhat = (xv[i] - m) * iv;
              sum_dy += self.grad[i];
              sum_dy_xhat += self.grad[i] * xhat;
            }
          for (int c = 0; c < C; ++c)
            for (int t = 0; t < L; ++t) {
              size_t i = at(b, c, f, t);
              T xhat = (xv[i] - m) * iv;
              (*gx)[i] +=
                  iv * (self.grad[i] - sum_dy / T(cnt) - xhat * sum_dy_xhat / T(cnt));
            }
        }
    }
  };
  return Tensor<T>(n);
}

// pooled views used by the backbone exit: avg over channels -> [B,F,T],
// max over time -> [B,C,F], avg over frequency -> [B,C,T]
enum class GlobalPool { AvgChannel, MaxTime, AvgFreq };

template <typename T>
Tensor<T> global_pool(const Tensor<T>& x, GlobalPool mode) {
  require(x.ndim() == 4, "global_pool: expects [B,C,F,T]");
  switch (mode) {
    case GlobalPool::AvgChannel:
      return reduce_mean(x, 1);
    case GlobalPool::MaxTime:
      return reduce_max(x, 3);
    case GlobalPool::AvgFreq:
      return reduce_mean(x, 2);
  }
  throw ValidationError("global_pool: bad mode");
}

}  // namespace auscult
