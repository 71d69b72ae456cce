#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <functional>
#include <memory>
#include <unordered_set>

#include "auscult/common.hpp"

namespace auscult {

// Reverse-mode autodiff over dense row-major tensors. The graph is rebuilt on
// every step (define-by-run): each op allocates a node whose backward closure
// scatters into its parents' grad buffers. Only the ops the model needs exist.
//
// Canonical activation layout is [batch, channel, frequency, time].

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily by backward(); only when needs_grad
  bool requires_grad = false;  // leaf flag (parameters, probed inputs)
  bool needs_grad = false;     // true if this or any ancestor requires grad
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Tensor zeros(const Shape& s, bool requires_grad = false) {
    return constant(s, T(0), requires_grad);
  }
  static Tensor constant(const Shape& s, T v, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->shape = s;
    n->value.assign(size_t(numel(s)), v);
    n->requires_grad = n->needs_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor from(const Shape& s, std::vector<T> vals, bool requires_grad = false) {
    require(int64_t(vals.size()) == numel(s), "Tensor::from: data/shape mismatch");
    auto n = std::make_shared<Node<T>>();
    n->shape = s;
    n->value = std::move(vals);
    n->requires_grad = n->needs_grad = requires_grad;
    return Tensor(std::move(n));
  }

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[size_t(i)]; }
  int ndim() const { return int(node_->shape.size()); }
  int64_t size() const { return int64_t(node_->value.size()); }
  // accessors are lvalue-only: a temporary's buffer would dangle
  std::vector<T>& data() & { return node_->value; }
  const std::vector<T>& data() const& { return node_->value; }
  std::vector<T>& data() && = delete;
  std::vector<T>& grad() & { return node_->grad; }
  const std::vector<T>& grad() const& { return node_->grad; }
  std::vector<T>& grad() && = delete;
  bool requires_grad() const { return node_->requires_grad; }
  T item() const {
    require(size() == 1, "item(): tensor is not scalar");
    return node_->value[0];
  }
  std::shared_ptr<Node<T>>& node() { return node_; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape,
                                   std::vector<std::shared_ptr<Node<T>>> parents) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value.resize(size_t(numel(n->shape)));
  for (const auto& p : parents)
    if (p->needs_grad) n->needs_grad = true;
  n->parents = std::move(parents);
  return n;
}

// grad buffer of a parent, or nullptr when gradient need not flow there
template <typename T>
inline std::vector<T>* gbuf(const std::shared_ptr<Node<T>>& p) {
  if (!p->needs_grad) return nullptr;
  if (p->grad.size() != p->value.size()) p->grad.assign(p->value.size(), T(0));
  return &p->grad;
}

inline void axis_extents(const Shape& s, int axis, int64_t& outer, int64_t& n,
                         int64_t& inner) {
  require(axis >= 0 && axis < int(s.size()), "axis out of range");
  outer = 1;
  for (int i = 0; i < axis; ++i) outer *= s[size_t(i)];
  n = s[size_t(axis)];
  inner = 1;
  for (int i = axis + 1; i < int(s.size()); ++i) inner *= s[size_t(i)];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  auto n = detail::make_node<T>(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n->value.size(); ++i)
    n->value[i] = a.data()[i] + b.data()[i];
  n->backward_fn = [](Node<T>& self) {
    for (int k = 0; k < 2; ++k)
      if (auto* g = detail::gbuf(self.parents[size_t(k)]))
        for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  auto n = detail::make_node<T>(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n->value.size(); ++i)
    n->value[i] = a.data()[i] - b.data()[i];
  n->backward_fn = [](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = detail::gbuf(self.parents[1]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  auto n = detail::make_node<T>(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n->value.size(); ++i)
    n->value[i] = a.data()[i] * b.data()[i];
  n->backward_fn = [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (auto* g = detail::gbuf(self.parents[1]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * av[i];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] * c;
  n->backward_fn = [c](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * c;
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] + c;
  n->backward_fn = [](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->value.size(); ++i)
    n->value[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  n->backward_fn = [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (av[i] > T(0)) (*g)[i] += self.grad[i];
  };
  return Tensor<T>(n);
}

// natural log; caller is responsible for positivity (pair with clamp_min)
template <typename T>
Tensor<T> log_t(const Tensor<T>& a) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::log(a.data()[i]);
  n->backward_fn = [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] / av[i];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sqrt_t(const Tensor<T>& a) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::sqrt(a.data()[i]);
  n->backward_fn = [](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i)
        (*g)[i] += self.grad[i] / (T(2) * self.value[i]);
  };
  return Tensor<T>(n);
}

// max(x, c); gradient passes only where x > c
template <typename T>
Tensor<T> clamp_min(const Tensor<T>& a, T c) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::max(a.data()[i], c);
  n->backward_fn = [c](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (av[i] > c) (*g)[i] += self.grad[i];
  };
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// broadcast against a vector over the trailing dimension
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  require(x.ndim() >= 1 && v.ndim() == 1 && x.shape().back() == v.dim(0),
          "add_rowvec: trailing dim mismatch");
  int64_t cols = v.size(), rows = x.size() / cols;
  auto n = detail::make_node<T>(x.shape(), {x.node(), v.node()});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c)
      n->value[size_t(r * cols + c)] = x.data()[size_t(r * cols + c)] + v.data()[size_t(c)];
  n->backward_fn = [rows, cols](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = detail::gbuf(self.parents[1]))
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          (*g)[size_t(c)] += self.grad[size_t(r * cols + c)];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  require(x.ndim() >= 1 && v.ndim() == 1 && x.shape().back() == v.dim(0),
          "mul_rowvec: trailing dim mismatch");
  int64_t cols = v.size(), rows = x.size() / cols;
  auto n = detail::make_node<T>(x.shape(), {x.node(), v.node()});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c)
      n->value[size_t(r * cols + c)] = x.data()[size_t(r * cols + c)] * v.data()[size_t(c)];
  n->backward_fn = [rows, cols](Node<T>& self) {
    const auto& xv = self.parents[0]->value;
    const auto& vv = self.parents[1]->value;
    if (auto* g = detail::gbuf(self.parents[0]))
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          (*g)[size_t(r * cols + c)] += self.grad[size_t(r * cols + c)] * vv[size_t(c)];
    if (auto* g = detail::gbuf(self.parents[1]))
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          (*g)[size_t(c)] += self.grad[size_t(r * cols + c)] * xv[size_t(r * cols + c)];
  };
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto n = detail::make_node<T>(Shape{1}, {a.node()});
  T acc = 0;
  for (T v : a.data()) acc += v;
  n->value[0] = acc;
  n->backward_fn = [](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scale(sum_all(a), T(1) / T(a.size()));
}

namespace detail {
inline Shape drop_axis(const Shape& s, int axis) {
  Shape out;
  for (int i = 0; i < int(s.size()); ++i)
    if (i != axis) out.push_back(s[size_t(i)]);
  if (out.empty()) out.push_back(1);
  return out;
}
}  // namespace detail

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, int axis) {
  int64_t outer, len, inner;
  detail::axis_extents(a.shape(), axis, outer, len, inner);
  auto n = detail::make_node<T>(detail::drop_axis(a.shape(), axis), {a.node()});
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      T acc = 0;
      for (int64_t k = 0; k < len; ++k) acc += a.data()[size_t((o * len + k) * inner + i)];
      n->value[size_t(o * inner + i)] = acc;
    }
  n->backward_fn = [outer, len, inner](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t k = 0; k < len; ++k)
          for (int64_t i = 0; i < inner; ++i)
            (*g)[size_t((o * len + k) * inner + i)] += self.grad[size_t(o * inner + i)];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, int axis) {
  return scale(reduce_sum(a, axis), T(1) / T(a.dim(axis)));
}

template <typename T>
Tensor<T> reduce_max(const Tensor<T>& a, int axis) {
  int64_t outer, len, inner;
  detail::axis_extents(a.shape(), axis, outer, len, inner);
  auto n = detail::make_node<T>(detail::drop_axis(a.shape(), axis), {a.node()});
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(outer * inner), 0);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      int64_t best = (o * len) * inner + i;
      T bv = a.data()[size_t(best)];
      for (int64_t k = 1; k < len; ++k) {
        int64_t idx = (o * len + k) * inner + i;
        if (a.data()[size_t(idx)] > bv) {
          bv = a.data()[size_t(idx)];
          best = idx;
        }
      }
      n->value[size_t(o * inner + i)] = bv;
      (*argmax)[size_t(o * inner + i)] = best;
    }
  n->backward_fn = [argmax](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t j = 0; j < argmax->size(); ++j)
        (*g)[size_t((*argmax)[j])] += self.grad[j];
  };
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& s) {
  require(numel(s) == a.size(), "reshape: element count mismatch");
  auto n = detail::make_node<T>(s, {a.node()});
  n->value = a.data();
  n->backward_fn = [](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& perm) {
  require(int(perm.size()) == a.ndim(), "permute: rank mismatch");
  int nd = a.ndim();
  Shape out_shape(size_t(nd), 0);
  for (int i = 0; i < nd; ++i) out_shape[size_t(i)] = a.dim(perm[size_t(i)]);
  std::vector<int64_t> in_strides(size_t(nd), 1);
  for (int i = nd - 2; i >= 0; --i)
    in_strides[size_t(i)] = in_strides[size_t(i + 1)] * a.dim(i + 1);
  // stride of the input index as the output index walks in row-major order
  std::vector<int64_t> walk(size_t(nd), 0);
  for (int i = 0; i < nd; ++i) walk[size_t(i)] = in_strides[size_t(perm[size_t(i)])];
  auto step_indices = [out_shape, walk, nd](auto&& body) {
    std::vector<int64_t> coord(size_t(nd), 0);
    int64_t in_idx = 0, out_idx = 0;
    const int64_t total = numel(out_shape);
    while (out_idx < total) {
      body(out_idx, in_idx);
      ++out_idx;
      for (int i = nd - 1; i >= 0; --i) {
        in_idx += walk[size_t(i)];
        if (++coord[size_t(i)] < out_shape[size_t(i)]) break;
        in_idx -= walk[size_t(i)] * out_shape[size_t(i)];
        coord[size_t(i)] = 0;
      }
    }
  };
  auto n = detail::make_node<T>(out_shape, {a.node()});
  {
    const auto& src = a.data();
    auto& dst = n->value;
    step_indices([&](int64_t out_idx, int64_t in_idx) {
      dst[size_t(out_idx)] = src[size_t(in_idx)];
    });
  }
  // indices are re-walked in backward instead of being stored
  n->backward_fn = [step_indices](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      step_indices([&](int64_t out_idx, int64_t in_idx) {
        (*g)[size_t(in_idx)] += self.grad[size_t(out_idx)];
      });
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  require(!xs.empty(), "concat: empty input list");
  Shape s = xs[0].shape();
  int total = 0;
  for (const auto& x : xs) {
    require(x.ndim() == int(s.size()), "concat: rank mismatch");
    for (int i = 0; i < x.ndim(); ++i)
      if (i != axis)
        require(x.dim(i) == s[size_t(i)], "concat: non-axis dim mismatch");
    total += x.dim(axis);
  }
  s[size_t(axis)] = total;
  std::vector<std::shared_ptr<Node<T>>> parents;
  for (const auto& x : xs) parents.push_back(x.node());
  auto n = detail::make_node<T>(s, parents);
  int64_t outer, len, inner;
  detail::axis_extents(s, axis, outer, len, inner);
  auto spans = std::make_shared<std::vector<int64_t>>();  // per-input axis extents
  int64_t off = 0;
  for (const auto& x : xs) {
    int64_t xl = x.dim(axis);
    spans->push_back(xl);
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(x.data().begin() + o * xl * inner, size_t(xl * inner),
                  n->value.begin() + (o * len + off) * inner);
    off += xl;
  }
  n->backward_fn = [outer, len, inner, spans](Node<T>& self) {
    int64_t off2 = 0;
    for (size_t k = 0; k < spans->size(); ++k) {
      int64_t xl = (*spans)[k];
      if (auto* g = detail::gbuf(self.parents[k]))
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t j = 0; j < xl * inner; ++j)
            (*g)[size_t(o * xl * inner + j)] +=
                self.grad[size_t((o * len + off2) * inner + j)];
      off2 += xl;
    }
  };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> select_rows(const Tensor<T>& a, std::vector<int> rows) {
  require(a.ndim() == 2, "select_rows: expects [N,E]");
  int E = a.dim(1);
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  auto n = detail::make_node<T>(Shape{int(idx->size()), E}, {a.node()});
  for (size_t r = 0; r < idx->size(); ++r) {
    require((*idx)[r] >= 0 && (*idx)[r] < a.dim(0), "select_rows: index out of range");
    std::copy_n(a.data().begin() + int64_t((*idx)[r]) * E, size_t(E),
                n->value.begin() + int64_t(r) * E);
  }
  n->backward_fn = [idx, E](Node<T>& self) {
    if (auto* g = detail::gbuf(self.parents[0]))
      for (size_t r = 0; r < idx->size(); ++r)
        for (int c = 0; c < E; ++c)
          (*g)[size_t(int64_t((*idx)[r]) * E + c)] += self.grad[size_t(int64_t(r) * E + c)];
  };
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// matrix products (Eigen kernels)
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<EMat<T>>;
template <typename T>
using CMap = Eigen::Map<const EMat<T>>;
}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  auto n = detail::make_node<T>(Shape{int(M), int(N)}, {a.node(), b.node()});
  detail::Map<T>(n->value.data(), M, N).noalias() =
      detail::CMap<T>(a.data().data(), M, K) * detail::CMap<T>(b.data().data(), K, N);
  n->backward_fn = [M, K, N](Node<T>& self) {
    detail::CMap<T> g(self.grad.data(), M, N);
    if (auto* ga = detail::gbuf(self.parents[0]))
      detail::Map<T>(ga->data(), M, K).noalias() +=
          g * detail::CMap<T>(self.parents[1]->value.data(), K, N).transpose();
    if (auto* gb = detail::gbuf(self.parents[1]))
      detail::Map<T>(gb->data(), K, N).noalias() +=
          detail::CMap<T>(self.parents[0]->value.data(), M, K).transpose() * g;
  };
  return Tensor<T>(n);
}

// batched matmul: [N,M,K] x [N,K,P] -> [N,M,P]
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.ndim() == 3 && b.ndim() == 3 && a.dim(0) == b.dim(0) &&
              a.dim(2) == b.dim(1),
          "bmm: incompatible shapes");
  int64_t B = a.dim(0), M = a.dim(1), K = a.dim(2), P = b.dim(2);
  auto n = detail::make_node<T>(Shape{int(B), int(M), int(P)}, {a.node(), b.node()});
  for (int64_t i = 0; i < B; ++i)
    detail::Map<T>(n->value.data() + i * M * P, M, P).noalias() =
        detail::CMap<T>(a.data().data() + i * M * K, M, K) *
        detail::CMap<T>(b.data().data() + i * K * P, K, P);
  n->backward_fn = [B, M, K, P](Node<T>& self) {
    auto* ga = detail::gbuf(self.parents[0]);
    auto* gb = detail::gbuf(self.parents[1]);
    for (int64_t i = 0; i < B; ++i) {
      detail::CMap<T> g(self.grad.data() + i * M * P, M, P);
      if (ga)
        detail::Map<T>(ga->data() + i * M * K, M, K).noalias() +=
            g * detail::CMap<T>(self.parents[1]->value.data() + i * K * P, K, P).transpose();
      if (gb)
        detail::Map<T>(gb->data() + i * K * P, K, P).noalias() +=
            detail::CMap<T>(self.parents[0]->value.data() + i * M * K, M, K).transpose() * g;
    }
  };
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// backward pass
// ---------------------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& loss) {
  require(loss.size() == 1, "backward: loss must be a scalar tensor");
  // post-order over the DAG, then reverse
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->needs_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  if (!loss.node()->needs_grad) {
    std::fprintf(stderr, "auscult: backward on a detached graph; gradients are zero\n");
    return;
  }
  // Leaves carry grad buffers across steps; clear the stale ones. Interior
  // buffers are allocated lazily on first write and released right after
  // their node backpropagates, which bounds peak memory.
  for (Node<T>* n : order)
    if (n->grad.size() == n->value.size()) std::fill(n->grad.begin(), n->grad.end(), T(0));
  loss.node()->grad.assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->grad.empty()) continue;  // no gradient reached this node
    if (n->backward_fn) n->backward_fn(*n);
    if (!n->requires_grad) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

// Max relative error between analytic gradients of f at x and central finite
// differences. f must be a deterministic tensor->scalar map; x.requires_grad
// must be set. Intended for double precision.
template <typename T, typename F>
T finite_diff_check(F&& f, Tensor<T>& x, T h) {
  require(x.requires_grad(), "finite_diff_check: x must require grad");
  Tensor<T> loss = f(x);
  backward(loss);
  std::vector<T> analytic = x.grad();
  require(analytic.size() == x.data().size(), "finite_diff_check: missing gradient");
  T max_rel = 0;
  for (size_t i = 0; i < x.data().size(); ++i) {
    T keep = x.data()[i];
    x.data()[i] = keep + h;
    T fp = f(x).item();
    x.data()[i] = keep - h;
    T fm = f(x).item();
    x.data()[i] = keep;
    T numeric = (fp - fm) / (2 * h);
    T rel = std::abs(analytic[i] - numeric) /
            (std::abs(analytic[i]) + std::abs(numeric) + T(1e-12));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace auscult
