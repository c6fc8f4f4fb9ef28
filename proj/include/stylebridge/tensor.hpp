#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace stylebridge {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
const char* dtype_name() {
  if constexpr (sizeof(T) == 4)
    return "float32";
  else
    return "float64";
}

namespace detail {
inline std::atomic<std::uint64_t> g_record_seq{1};
}

/// One node of the recorded computation graph. The record sequence number
/// gives a topological order: every op's inputs were recorded before it, and
/// backward() visits reachable nodes in exact reverse record order.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;

  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

/// Dense row-major tensor with reverse-mode autodiff. Value semantics: ops
/// never mutate their inputs, they create new tensors that remember their
/// parents. Gradients accumulate additively across fan-out.
template <typename T>
class Tensor {
public:
  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (data.size() != shape_numel(shape))
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    node->seq = detail::g_record_seq.fetch_add(1);
    return Tensor(std::move(node));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> d(shape_numel(shape), T(0));
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor ones(Shape shape, bool requires_grad = false) {
    std::vector<T> d(shape_numel(shape), T(1));
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> d(shape_numel(shape), value);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from_data(Shape{}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t size() const { return node().data.size(); }
  const std::vector<T>& data() const { return node().data; }
  bool requires_grad() const { return node().requires_grad; }

  T item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
    return node().data[0];
  }

  const std::vector<T>& grad() const {
    if (!node().requires_grad) throw std::runtime_error("grad() on tensor without requires_grad");
    if (node().grad.size() != node().data.size())
      throw std::runtime_error("grad() before backward()");
    return node().grad;
  }

  void zero_grad() {
    if (n_ && n_->requires_grad) n_->grad.assign(n_->data.size(), T(0));
  }

  /// Same data, no graph history, no gradient tracking.
  Tensor detach() const {
    return from_data(node().shape, node().data, false);
  }

  /// Fresh leaf with this tensor's values that accumulates gradients.
  Tensor leaf_copy() const {
    return from_data(node().shape, node().data, true);
  }

  /// Reverse-mode sweep from a scalar root. Visits the reachable subgraph in
  /// exact reverse record order, accumulating into every requires_grad leaf.
  void backward() const {
    const TensorNode<T>& root = node();
    if (root.data.size() != 1)
      throw std::invalid_argument("backward() requires a scalar root, got " + shape_str(root.shape));
    if (!root.requires_grad)
      throw std::invalid_argument("backward() on a tensor that requires no gradient");

    n_->ensure_grad();
    n_->grad[0] += T(1);

    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> seen;
    std::vector<TensorNode<T>*> stack{n_.get()};
    while (!stack.empty()) {
      TensorNode<T>* cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      order.push_back(cur);
      for (auto& p : cur->parents)
        if (p->requires_grad) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const TensorNode<T>* a, const TensorNode<T>* b) { return a->seq > b->seq; });
    for (TensorNode<T>* nd : order) {
      if (nd->backprop) nd->backprop(*nd);
    }
  }

  std::shared_ptr<TensorNode<T>> node_ptr() const { return n_; }

private:
  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : n_(std::move(n)) {}

  TensorNode<T>& node() const {
    if (!n_) throw std::runtime_error("use of undefined tensor");
    return *n_;
  }

  std::shared_ptr<TensorNode<T>> n_;

  template <typename U>
  friend Tensor<U> make_op_result(Shape, std::vector<U>, std::vector<Tensor<U>>,
                                  std::function<void(const TensorNode<U>&)>);
};

/// Builds an op result; records parents and the pullback only when some
/// input tracks gradients.
template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> data, std::vector<Tensor<T>> inputs,
                         std::function<void(const TensorNode<T>&)> backprop) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  auto out = Tensor<T>::from_data(std::move(shape), std::move(data), needs);
  if (needs) {
    auto node = out.node_ptr();
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node_ptr());
    for (auto& p : node->parents) p->ensure_grad();
    node->backprop = std::move(backprop);
  }
  return out;
}

namespace detail {

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

template <typename T>
void check_finite(const char* op, const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(x))
      throw std::runtime_error(std::string(op) + " produced a non-finite value");
}

inline std::vector<bool> axes_mask(const Shape& shape, const std::vector<std::size_t>& axes) {
  if (axes.empty()) throw std::invalid_argument("reduce: no axes given");
  std::vector<bool> mask(shape.size(), false);
  for (auto a : axes) {
    if (a >= shape.size()) throw std::invalid_argument("reduce: axis out of range");
    if (shape[a] == 0) throw std::invalid_argument("reduce: empty reduction axis");
    mask[a] = true;
  }
  return mask;
}

inline Shape reduced_shape(const Shape& shape, const std::vector<bool>& mask) {
  Shape out;
  for (std::size_t a = 0; a < shape.size(); ++a)
    if (!mask[a]) out.push_back(shape[a]);
  return out;
}

// Calls fn(linear_in, linear_out) for every element of `shape`, where
// linear_out indexes the shape with masked axes removed.
template <typename F>
void for_each_reduce_pair(const Shape& shape, const std::vector<bool>& mask, F&& fn) {
  const std::size_t rank = shape.size();
  std::vector<std::size_t> out_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t a = rank; a-- > 0;) {
    if (!mask[a]) {
      out_stride[a] = s;
      s *= shape[a];
    }
  }
  const std::size_t n = shape_numel(shape);
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::size_t tmp = lin;
    std::size_t out = 0;
    for (std::size_t a = rank; a-- > 0;) {
      const std::size_t i = tmp % shape[a];
      tmp /= shape[a];
      out += out_stride[a] * (mask[a] ? 0 : i);
    }
    fn(lin, out);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("add", a, b);
  std::vector<T> out(a.size());
  const auto &da = a.data(), &db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_op_result<T>(a.shape(), std::move(out), {a, b}, [](const TensorNode<T>& self) {
    auto &pa = *self.parents[0], &pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("sub", a, b);
  std::vector<T> out(a.size());
  const auto &da = a.data(), &db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_op_result<T>(a.shape(), std::move(out), {a, b}, [](const TensorNode<T>& self) {
    auto &pa = *self.parents[0], &pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mul", a, b);
  std::vector<T> out(a.size());
  const auto &da = a.data(), &db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return make_op_result<T>(a.shape(), std::move(out), {a, b}, [](const TensorNode<T>& self) {
    auto &pa = *self.parents[0], &pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.data[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("div", a, b);
  std::vector<T> out(a.size());
  const auto &da = a.data(), &db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (db[i] == T(0)) throw std::domain_error("div: zero denominator");
    out[i] = da[i] / db[i];
  }
  return make_op_result<T>(a.shape(), std::move(out), {a, b}, [](const TensorNode<T>& self) {
    auto &pa = *self.parents[0], &pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T inv = T(1) / pb.data[i];
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * inv;
      if (pb.requires_grad) pb.grad[i] -= self.grad[i] * pa.data[i] * inv * inv;
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * c;
  return make_op_result<T>(a.shape(), std::move(out), {a}, [c](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + c;
  return make_op_result<T>(a.shape(), std::move(out), {a}, [](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(da[i]);
  detail::check_finite("exp", out);
  return make_op_result<T>(a.shape(), std::move(out), {a}, [](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * self.data[i];
  });
}

/// Natural log. Rejects non-positive inputs; losses that need a floored log
/// use log_floor instead.
template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(da[i] > T(0))) throw std::domain_error("log: non-positive input");
    out[i] = std::log(da[i]);
  }
  return make_op_result<T>(a.shape(), std::move(out), {a}, [](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa.grad[i] += self.grad[i] / pa.data[i];
  });
}

/// log(max(x, floor)). Gradient is zero on the clamped region.
template <typename T>
Tensor<T> log_floor(const Tensor<T>& a, T floor) {
  if (!(floor > T(0))) throw std::domain_error("log_floor: floor must be positive");
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(da[i], floor));
  return make_op_result<T>(a.shape(), std::move(out), {a}, [floor](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa.data[i] > floor) pa.grad[i] += self.grad[i] / pa.data[i];
  });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (da[i] < T(0)) throw std::domain_error("sqrt: negative input");
    out[i] = std::sqrt(da[i]);
  }
  // subgradient 0 at x == 0
  return make_op_result<T>(a.shape(), std::move(out), {a}, [](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa.data[i] > T(0)) pa.grad[i] += self.grad[i] / (T(2) * self.data[i]);
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] > T(0) ? da[i] : T(0);
  return make_op_result<T>(a.shape(), std::move(out), {a}, [](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa.data[i] > T(0)) pa.grad[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.size())
    throw std::invalid_argument("reshape: element count changes from " + shape_str(a.shape()) +
                                " to " + shape_str(new_shape));
  return make_op_result<T>(std::move(new_shape), a.data(), {a}, [](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: expects a rank-2 tensor");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = da[i * c + j];
  return make_op_result<T>(Shape{c, r}, std::move(out), {a}, [r, c](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) pa.grad[i * c + j] += self.grad[j * r + i];
  });
}

/// Insert an axis of extent n at `axis`, repeating the input along it. This is
/// the explicit-expansion companion of the reduce ops; there is no implicit
/// broadcasting anywhere else.
template <typename T>
Tensor<T> expand_axis(const Tensor<T>& a, std::size_t axis, std::size_t n) {
  if (axis > a.rank()) throw std::invalid_argument("expand_axis: axis out of range");
  if (n == 0) throw std::invalid_argument("expand_axis: zero extent");
  Shape out_shape = a.shape();
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  for (std::size_t i = axis; i < a.rank(); ++i) inner *= a.shape()[i];
  std::vector<T> out(outer * n * inner);
  const auto& da = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i)
        out[(o * n + k) * inner + i] = da[o * inner + i];
  return make_op_result<T>(std::move(out_shape), std::move(out), {a},
                           [outer, n, inner](const TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             for (std::size_t o = 0; o < outer; ++o)
                               for (std::size_t k = 0; k < n; ++k)
                                 for (std::size_t i = 0; i < inner; ++i)
                                   pa.grad[o * inner + i] += self.grad[(o * n + k) * inner + i];
                           });
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1])
    throw std::invalid_argument("concat_rows: incompatible shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  const std::size_t cols = a.shape()[1];
  std::vector<T> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t na = a.size();
  return make_op_result<T>(Shape{a.shape()[0] + b.shape()[0], cols}, std::move(out), {a, b},
                           [na](const TensorNode<T>& self) {
                             auto &pa = *self.parents[0], &pb = *self.parents[1];
                             if (pa.requires_grad)
                               for (std::size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
                             if (pb.requires_grad)
                               for (std::size_t i = na; i < self.grad.size(); ++i)
                                 pb.grad[i - na] += self.grad[i];
                           });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& rows) {
  if (a.rank() != 2) throw std::invalid_argument("gather_rows: expects a rank-2 tensor");
  const std::size_t cols = a.shape()[1];
  for (auto r : rows)
    if (r >= a.shape()[0]) throw std::out_of_range("gather_rows: row index out of range");
  std::vector<T> out(rows.size() * cols);
  const auto& da = a.data();
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = da[rows[r] * cols + j];
  return make_op_result<T>(Shape{rows.size(), cols}, std::move(out), {a},
                           [rows, cols](const TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             for (std::size_t r = 0; r < rows.size(); ++r)
                               for (std::size_t j = 0; j < cols; ++j)
                                 pa.grad[rows[r] * cols + j] += self.grad[r * cols + j];
                           });
}

/// out[b] = p[b, labels[b]]
template <typename T>
Tensor<T> pick_class(const Tensor<T>& p, const std::vector<int>& labels) {
  if (p.rank() != 2) throw std::invalid_argument("pick_class: expects a rank-2 tensor");
  const std::size_t b = p.shape()[0], c = p.shape()[1];
  if (labels.size() != b) throw std::invalid_argument("pick_class: label count mismatch");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= c)
      throw std::out_of_range("pick_class: label out of range");
  std::vector<T> out(b);
  const auto& dp = p.data();
  for (std::size_t i = 0; i < b; ++i) out[i] = dp[i * c + static_cast<std::size_t>(labels[i])];
  return make_op_result<T>(Shape{b}, std::move(out), {p}, [labels, c](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa.grad[i * c + static_cast<std::size_t>(labels[i])] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Matmul
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: expects rank-2 tensors");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  std::vector<T> out(m * n, T(0));
  const auto &da = a.data(), &db = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = da[i * k + kk];
      const T* brow = db.data() + kk * n;
      T* crow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return make_op_result<T>(Shape{m, n}, std::move(out), {a, b},
                           [m, k, n](const TensorNode<T>& self) {
                             auto &pa = *self.parents[0], &pb = *self.parents[1];
                             // dA = dC * B^T
                             if (pa.requires_grad) {
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t kk = 0; kk < k; ++kk) {
                                   const T* grow = self.grad.data() + i * n;
                                   const T* brow = pb.data.data() + kk * n;
                                   T acc = T(0);
                                   for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                   pa.grad[i * k + kk] += acc;
                                 }
                             }
                             // dB = A^T * dC
                             if (pb.requires_grad) {
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t kk = 0; kk < k; ++kk) {
                                   const T av = pa.data[i * k + kk];
                                   const T* grow = self.grad.data() + i * n;
                                   T* brow = pb.grad.data() + kk * n;
                                   for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                                 }
                             }
                           });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
  auto mask = detail::axes_mask(a.shape(), axes);
  Shape out_shape = detail::reduced_shape(a.shape(), mask);
  std::vector<T> out(shape_numel(out_shape), T(0));
  const auto& da = a.data();
  detail::for_each_reduce_pair(a.shape(), mask,
                               [&](std::size_t in, std::size_t o) { out[o] += da[in]; });
  const Shape in_shape = a.shape();
  return make_op_result<T>(std::move(out_shape), std::move(out), {a},
                           [in_shape, mask](const TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             detail::for_each_reduce_pair(in_shape, mask,
                                                          [&](std::size_t in, std::size_t o) {
                                                            pa.grad[in] += self.grad[o];
                                                          });
                           });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
  auto mask = detail::axes_mask(a.shape(), axes);
  Shape out_shape = detail::reduced_shape(a.shape(), mask);
  const std::size_t group = a.size() / std::max<std::size_t>(1, shape_numel(out_shape));
  std::vector<T> out(shape_numel(out_shape), T(0));
  const auto& da = a.data();
  detail::for_each_reduce_pair(a.shape(), mask,
                               [&](std::size_t in, std::size_t o) { out[o] += da[in]; });
  const T inv = T(1) / static_cast<T>(group);
  for (auto& v : out) v *= inv;
  const Shape in_shape = a.shape();
  return make_op_result<T>(std::move(out_shape), std::move(out), {a},
                           [in_shape, mask, inv](const TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             detail::for_each_reduce_pair(in_shape, mask,
                                                          [&](std::size_t in, std::size_t o) {
                                                            pa.grad[in] += self.grad[o] * inv;
                                                          });
                           });
}

/// Population variance (divide by N) over the given axes.
template <typename T>
Tensor<T> var(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
  auto mask = detail::axes_mask(a.shape(), axes);
  Shape out_shape = detail::reduced_shape(a.shape(), mask);
  const std::size_t out_n = shape_numel(out_shape);
  const std::size_t group = a.size() / std::max<std::size_t>(1, out_n);
  const T inv = T(1) / static_cast<T>(group);

  std::vector<T> mu(out_n, T(0));
  const auto& da = a.data();
  detail::for_each_reduce_pair(a.shape(), mask,
                               [&](std::size_t in, std::size_t o) { mu[o] += da[in]; });
  for (auto& v : mu) v *= inv;
  std::vector<T> out(out_n, T(0));
  detail::for_each_reduce_pair(a.shape(), mask, [&](std::size_t in, std::size_t o) {
    const T d = da[in] - mu[o];
    out[o] += d * d;
  });
  for (auto& v : out) v *= inv;

  const Shape in_shape = a.shape();
  return make_op_result<T>(std::move(out_shape), std::move(out), {a},
                           [in_shape, mask, inv, mu](const TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             detail::for_each_reduce_pair(
                                 in_shape, mask, [&](std::size_t in, std::size_t o) {
                                   pa.grad[in] +=
                                       self.grad[o] * T(2) * (pa.data[in] - mu[o]) * inv;
                                 });
                           });
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

/// Row-wise softmax over the last axis, computed with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  if (a.rank() < 1) throw std::invalid_argument("softmax: expects rank >= 1");
  const std::size_t c = a.shape().back();
  if (c < 1) throw std::invalid_argument("softmax: empty class axis");
  const std::size_t rows = a.size() / c;
  std::vector<T> out(a.size());
  const auto& da = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = da.data() + r * c;
    T* y = out.data() + r * c;
    T mx = x[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    T denom = T(0);
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      denom += y[j];
    }
    const T inv = T(1) / denom;
    for (std::size_t j = 0; j < c; ++j) y[j] *= inv;
  }
  return make_op_result<T>(a.shape(), std::move(out), {a}, [c, rows](const TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const T* p = self.data.data() + r * c;
      const T* g = self.grad.data() + r * c;
      T dot = T(0);
      for (std::size_t j = 0; j < c; ++j) dot += g[j] * p[j];
      for (std::size_t j = 0; j < c; ++j) pa.grad[r * c + j] += p[j] * (g[j] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Max over coordinates of |analytic - central difference| normalized by
/// (|analytic| + |central| + 1e-12). The builder f must map a tensor shaped
/// like x to a scalar loss, deterministically.
template <typename T>
double check_gradients(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                       T eps) {
  Tensor<T> leaf = x.leaf_copy();
  Tensor<T> y = f(leaf);
  if (y.size() != 1) throw std::invalid_argument("check_gradients: f must produce a scalar");
  y.backward();
  const std::vector<T> analytic = leaf.grad();

  double worst = 0.0;
  std::vector<T> base = x.data();
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<T> plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    const double yp = static_cast<double>(f(Tensor<T>::from_data(x.shape(), plus)).item());
    const double ym = static_cast<double>(f(Tensor<T>::from_data(x.shape(), minus)).item());
    const double central = (yp - ym) / (2.0 * static_cast<double>(eps));
    const double a = static_cast<double>(analytic[i]);
    const double err = std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace stylebridge
