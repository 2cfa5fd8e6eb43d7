#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "latentaug/tensor.hpp"

namespace latentaug {

namespace detail {

inline int& nograd_depth() {
  static thread_local int depth = 0;
  return depth;
}

}  // namespace detail

// While alive, operations run as plain value computations and nothing is
// recorded on any tape. Used for gradient math itself, validation passes,
// and prediction.
struct NoGradScope {
  NoGradScope() { ++detail::nograd_depth(); }
  ~NoGradScope() { --detail::nograd_depth(); }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;
};

// Reverse-mode tape, rebuilt per forward pass (define-by-run). Creating a
// tape makes it the active recording target for the current thread; tapes
// nest as a stack. A tape is confined to one thread, but independent tapes
// may run concurrently on different threads.
template <typename Scalar>
class TapeT {
 public:
  using Tensor = TensorT<Scalar>;
  // Given the gradient flowing into a node, produce gradients for its inputs.
  // Entries whose `needed` flag is false may be left default-constructed.
  using Vjp = std::function<std::vector<Tensor>(const Tensor& upstream, const std::vector<bool>& needed)>;

  TapeT() : id_(next_id().fetch_add(1) + 1) { stack().push_back(this); }
  ~TapeT() { stack().pop_back(); }
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  static TapeT* active() {
    if (detail::nograd_depth() != 0) return nullptr;
    auto& s = stack();
    return s.empty() ? nullptr : s.back();
  }

  // Registers a grad-tracked tensor as a leaf (idempotent). Inputs of
  // recorded operations are watched automatically.
  std::int64_t watch(const Tensor& t) {
    if (!t.grad_tracked()) throw ContractError("watch: tensor is not grad-tracked");
    if (contains(t)) return t.node_;
    nodes_.push_back(Node{{}, nullptr, t.shape()});
    t.tape_id_ = id_;
    t.node_ = static_cast<std::int64_t>(nodes_.size()) - 1;
    return t.node_;
  }

  bool contains(const Tensor& t) const { return t.tape_id_ == id_ && t.node_ >= 0; }

  void record(Tensor& out, const std::vector<const Tensor*>& inputs, Vjp vjp) {
    std::vector<std::int64_t> ids;
    ids.reserve(inputs.size());
    for (const Tensor* in : inputs) ids.push_back(in->grad_tracked() ? watch(*in) : -1);
    nodes_.push_back(Node{std::move(ids), std::move(vjp), out.shape()});
    out.tape_id_ = id_;
    out.node_ = static_cast<std::int64_t>(nodes_.size()) - 1;
    out.set_grad_tracked(true);
  }

  // Chain rule in reverse topological (creation) order. After this call,
  // grad() is defined for every watched leaf; leaves with no path to the
  // loss get zero gradients.
  void backward(const Tensor& loss) {
    if (!contains(loss)) throw ContractError("backward: loss is not recorded on this tape");
    if (loss.size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    NoGradScope guard;
    grads_.assign(nodes_.size(), std::optional<Tensor>{});
    grads_[static_cast<std::size_t>(loss.node_)] = Tensor::ones(loss.shape());
    for (std::int64_t i = loss.node_; i >= 0; --i) {
      auto& slot = grads_[static_cast<std::size_t>(i)];
      if (!slot.has_value()) continue;
      const Node& node = nodes_[static_cast<std::size_t>(i)];
      if (!node.vjp) continue;  // leaf
      std::vector<bool> needed(node.inputs.size());
      for (std::size_t k = 0; k < node.inputs.size(); ++k) needed[k] = node.inputs[k] >= 0;
      std::vector<Tensor> gin = node.vjp(*slot, needed);
      if (gin.size() != node.inputs.size()) throw ContractError("backward: vjp arity mismatch");
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        if (node.inputs[k] >= 0) accumulate(node.inputs[k], gin[k]);
      }
    }
    backward_done_ = true;
  }

  Tensor grad(const Tensor& t) const {
    if (!backward_done_) throw ContractError("grad: backward has not run on this tape");
    if (!contains(t)) throw ContractError("grad: tensor is not on this tape");
    const auto& slot = grads_[static_cast<std::size_t>(t.node_)];
    if (slot.has_value()) return *slot;
    return Tensor::zeros(nodes_[static_cast<std::size_t>(t.node_)].shape);
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::int64_t> inputs;
    Vjp vjp;
    Shape shape;
  };

  void accumulate(std::int64_t id, const Tensor& g) {
    auto& slot = grads_[static_cast<std::size_t>(id)];
    if (g.shape() != nodes_[static_cast<std::size_t>(id)].shape) {
      throw ContractError("backward: gradient shape mismatch at node " + std::to_string(id));
    }
    if (!slot.has_value()) {
      slot = g;
    } else {
      slot = Tensor(g.shape(), slot->array() + g.array());
    }
  }

  static std::vector<TapeT*>& stack() {
    static thread_local std::vector<TapeT*> s;
    return s;
  }

  static std::atomic<std::uint64_t>& next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
  }

  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor>> grads_;
  std::uint64_t id_;
  bool backward_done_ = false;
};

using Tape = TapeT<double>;

// ---------------------------------------------------------------------------
// Operations. Each one computes its value eagerly and, when a tape is active
// and any input is grad-tracked, records a node whose vjp closure carries the
// saved values needed for the backward pass.
// ---------------------------------------------------------------------------

enum class EwOp { add, sub, mul, neg, exp, log, sigmoid, relu, square };
enum class ReduceOp { sum, mean };

namespace detail {

template <typename Scalar>
void maybe_record(TensorT<Scalar>& out, std::initializer_list<const TensorT<Scalar>*> inputs,
                  typename TapeT<Scalar>::Vjp vjp) {
  auto* tape = TapeT<Scalar>::active();
  if (tape == nullptr) return;
  bool tracked = false;
  for (const auto* in : inputs) tracked = tracked || in->grad_tracked();
  if (!tracked) return;
  tape->record(out, std::vector<const TensorT<Scalar>*>(inputs), std::move(vjp));
}

template <typename Scalar>
bool is_bias_broadcast(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  return b.rank() == 1 && a.rank() >= 1 && !a.same_shape(b) && a.shape().back() == b.shape()[0];
}

template <typename Scalar>
void check_binary_shapes(const char* op, const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.same_shape(b) || is_bias_broadcast(a, b)) return;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()) + " are incompatible");
}

// Sum of u over all leading axes, leaving a rank-1 tensor over the last axis.
template <typename Scalar>
TensorT<Scalar> sum_to_last_axis(const TensorT<Scalar>& u, const Shape& bias_shape) {
  using Array = typename TensorT<Scalar>::Array;
  const std::int64_t last = u.shape().back();
  Array out = Array::Zero(last);
  const auto& d = u.array();
  for (std::int64_t i = 0; i < u.size(); ++i) out[i % last] += d[i];
  return TensorT<Scalar>(bias_shape, std::move(out));
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace detail

template <typename Scalar>
TensorT<Scalar> add(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  detail::check_binary_shapes("add", a, b);
  using Array = typename TensorT<Scalar>::Array;
  Array data;
  const bool broadcast = !a.same_shape(b);
  if (!broadcast) {
    data = a.array() + b.array();
  } else {
    data = a.array();
    const std::int64_t last = a.shape().back();
    for (std::int64_t i = 0; i < a.size(); ++i) data[i] += b.array()[i % last];
  }
  TensorT<Scalar> out(a.shape(), std::move(data));
  detail::maybe_record(out, {&a, &b},
                       [broadcast, bshape = b.shape()](const TensorT<Scalar>& u, const std::vector<bool>& needed) {
                         std::vector<TensorT<Scalar>> g(2);
                         if (needed[0]) g[0] = u;
                         if (needed[1]) g[1] = broadcast ? detail::sum_to_last_axis(u, bshape) : u;
                         return g;
                       });
  return out;
}

template <typename Scalar>
TensorT<Scalar> sub(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  detail::check_binary_shapes("sub", a, b);
  using Array = typename TensorT<Scalar>::Array;
  Array data;
  const bool broadcast = !a.same_shape(b);
  if (!broadcast) {
    data = a.array() - b.array();
  } else {
    data = a.array();
    const std::int64_t last = a.shape().back();
    for (std::int64_t i = 0; i < a.size(); ++i) data[i] -= b.array()[i % last];
  }
  TensorT<Scalar> out(a.shape(), std::move(data));
  detail::maybe_record(out, {&a, &b},
                       [broadcast, bshape = b.shape()](const TensorT<Scalar>& u, const std::vector<bool>& needed) {
                         std::vector<TensorT<Scalar>> g(2);
                         if (needed[0]) g[0] = u;
                         if (needed[1]) {
                           TensorT<Scalar> gb = broadcast ? detail::sum_to_last_axis(u, bshape) : u;
                           g[1] = TensorT<Scalar>(gb.shape(), -gb.array());
                         }
                         return g;
                       });
  return out;
}

template <typename Scalar>
TensorT<Scalar> mul(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  detail::check_binary_shapes("mul", a, b);
  using Array = typename TensorT<Scalar>::Array;
  Array data;
  const bool broadcast = !a.same_shape(b);
  if (!broadcast) {
    data = a.array() * b.array();
  } else {
    data = a.array();
    const std::int64_t last = a.shape().back();
    for (std::int64_t i = 0; i < a.size(); ++i) data[i] *= b.array()[i % last];
  }
  TensorT<Scalar> out(a.shape(), std::move(data));
  detail::maybe_record(
      out, {&a, &b},
      [broadcast, ac = a.array(), bc = b.array(), ashape = a.shape(),
       bshape = b.shape()](const TensorT<Scalar>& u, const std::vector<bool>& needed) {
        std::vector<TensorT<Scalar>> g(2);
        const std::int64_t last = ashape.back();
        if (needed[0]) {
          Array da = u.array();
          if (!broadcast) {
            da *= bc;
          } else {
            for (std::int64_t i = 0; i < da.size(); ++i) da[i] *= bc[i % last];
          }
          g[0] = TensorT<Scalar>(ashape, std::move(da));
        }
        if (needed[1]) {
          if (!broadcast) {
            g[1] = TensorT<Scalar>(bshape, u.array() * ac);
          } else {
            Array db = Array::Zero(last);
            for (std::int64_t i = 0; i < u.size(); ++i) db[i % last] += u.array()[i] * ac[i];
            g[1] = TensorT<Scalar>(bshape, std::move(db));
          }
        }
        return g;
      });
  return out;
}

template <typename Scalar>
TensorT<Scalar> neg(const TensorT<Scalar>& a) {
  TensorT<Scalar> out(a.shape(), -a.array());
  detail::maybe_record(out, {&a}, [](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), -u.array())};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> exp(const TensorT<Scalar>& a) {
  TensorT<Scalar> out(a.shape(), a.array().exp());
  detail::maybe_record(out, {&a}, [y = out.array()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), u.array() * y)};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> log(const TensorT<Scalar>& a) {
  if (!(a.array() > Scalar(0)).all()) {
    throw DomainError("log: input must be strictly positive");
  }
  TensorT<Scalar> out(a.shape(), a.array().log());
  detail::maybe_record(out, {&a}, [x = a.array()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), u.array() / x)};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> sigmoid(const TensorT<Scalar>& a) {
  using Array = typename TensorT<Scalar>::Array;
  Array data(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) data[i] = detail::stable_sigmoid(a.array()[i]);
  TensorT<Scalar> out(a.shape(), std::move(data));
  detail::maybe_record(out, {&a}, [y = out.array()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), u.array() * y * (Scalar(1) - y))};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> relu(const TensorT<Scalar>& a) {
  TensorT<Scalar> out(a.shape(), a.array().max(Scalar(0)));
  // Subgradient at exactly 0 is defined as 0.
  detail::maybe_record(out, {&a}, [x = a.array()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    using Array = typename TensorT<Scalar>::Array;
    Array g = (x > Scalar(0)).select(u.array(), Array::Zero(x.size()));
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), std::move(g))};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> square(const TensorT<Scalar>& a) {
  TensorT<Scalar> out(a.shape(), a.array().square());
  detail::maybe_record(out, {&a}, [x = a.array()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), u.array() * Scalar(2) * x)};
  });
  return out;
}

// Generic entry points dispatching on the operator kind.
template <typename Scalar>
TensorT<Scalar> elementwise(EwOp op, const TensorT<Scalar>& a) {
  switch (op) {
    case EwOp::neg: return neg(a);
    case EwOp::exp: return exp(a);
    case EwOp::log: return log(a);
    case EwOp::sigmoid: return sigmoid(a);
    case EwOp::relu: return relu(a);
    case EwOp::square: return square(a);
    default: throw ContractError("elementwise: binary operator called with one operand");
  }
}

template <typename Scalar>
TensorT<Scalar> elementwise(EwOp op, const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  switch (op) {
    case EwOp::add: return add(a, b);
    case EwOp::sub: return sub(a, b);
    case EwOp::mul: return mul(a, b);
    default: throw ContractError("elementwise: unary operator called with two operands");
  }
}

template <typename Scalar>
TensorT<Scalar> add_scalar(const TensorT<Scalar>& a, Scalar c) {
  TensorT<Scalar> out(a.shape(), a.array() + c);
  detail::maybe_record(out, {&a}, [](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{u};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> mul_scalar(const TensorT<Scalar>& a, Scalar c) {
  TensorT<Scalar> out(a.shape(), a.array() * c);
  detail::maybe_record(out, {&a}, [c](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), u.array() * c)};
  });
  return out;
}

// Clamps values into [lo, hi]. The gradient is passed through strictly inside
// the interval and is 0 at and beyond the bounds.
template <typename Scalar>
TensorT<Scalar> clamp(const TensorT<Scalar>& a, Scalar lo, Scalar hi) {
  if (!(lo <= hi)) throw DomainError("clamp: lo must not exceed hi");
  TensorT<Scalar> out(a.shape(), a.array().max(lo).min(hi));
  detail::maybe_record(out, {&a}, [x = a.array(), lo, hi](const TensorT<Scalar>& u, const std::vector<bool>&) {
    using Array = typename TensorT<Scalar>::Array;
    Array g = (x > lo && x < hi).select(u.array(), Array::Zero(x.size()));
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>(u.shape(), std::move(g))};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> transpose(const TensorT<Scalar>& a) {
  if (a.rank() != 2) throw DimensionError("transpose: tensor of shape " + shape_str(a.shape()) + " is not rank 2");
  const std::int64_t m = a.shape()[0];
  const std::int64_t n = a.shape()[1];
  typename TensorT<Scalar>::Array data(a.size());
  typename TensorT<Scalar>::MatrixMap(data.data(), n, m) = a.mat().transpose();
  TensorT<Scalar> out({n, m}, std::move(data));
  detail::maybe_record(out, {&a}, [](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{transpose(u)};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> reshape(const TensorT<Scalar>& a, Shape shape) {
  TensorT<Scalar> out = a.reshaped(std::move(shape));
  out.set_grad_tracked(false);
  detail::maybe_record(out, {&a}, [orig = a.shape()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    return std::vector<TensorT<Scalar>>{u.reshaped(orig)};
  });
  return out;
}

// Contiguous slice of a rank-1 tensor; the gradient scatters back into zeros.
template <typename Scalar>
TensorT<Scalar> slice(const TensorT<Scalar>& a, std::int64_t start, std::int64_t len) {
  if (a.rank() != 1) throw DimensionError("slice: tensor must be rank 1");
  if (start < 0 || len <= 0 || start + len > a.size()) {
    throw DimensionError("slice: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") out of range for size " + std::to_string(a.size()));
  }
  using Array = typename TensorT<Scalar>::Array;
  Array data = a.array().segment(start, len);
  TensorT<Scalar> out({len}, std::move(data));
  detail::maybe_record(out, {&a}, [start, n = a.size()](const TensorT<Scalar>& u, const std::vector<bool>&) {
    Array g = Array::Zero(n);
    g.segment(start, u.size()) = u.array();
    return std::vector<TensorT<Scalar>>{TensorT<Scalar>({n}, std::move(g))};
  });
  return out;
}

template <typename Scalar>
TensorT<Scalar> matmul(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: operands must be rank 2, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  if (a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::int64_t m = a.shape()[0];
  const std::int64_t n = b.shape()[1];
  typename TensorT<Scalar>::Array data(m * n);
  typename TensorT<Scalar>::MatrixMap(data.data(), m, n).noalias() = a.mat() * b.mat();
  TensorT<Scalar> out({m, n}, std::move(data));
  detail::maybe_record(out, {&a, &b},
                       [ac = a, bc = b](const TensorT<Scalar>& u, const std::vector<bool>& needed) {
                         std::vector<TensorT<Scalar>> g(2);
                         if (needed[0]) g[0] = matmul(u, transpose(bc));
                         if (needed[1]) g[1] = matmul(transpose(ac), u);
                         return g;
                       });
  return out;
}

namespace detail {

struct AxisSpan {
  std::int64_t outer;
  std::int64_t len;
  std::int64_t inner;
};

inline AxisSpan axis_span(const Shape& shape, std::int64_t axis) {
  AxisSpan s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (std::int64_t i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

template <typename Scalar>
TensorT<Scalar> reduce(ReduceOp op, const TensorT<Scalar>& a,
                       std::optional<std::int64_t> axis = std::nullopt) {
  using Array = typename TensorT<Scalar>::Array;
  if (!axis.has_value()) {
    Scalar total = a.array().sum();
    const Scalar scale = op == ReduceOp::mean ? Scalar(1) / static_cast<Scalar>(a.size()) : Scalar(1);
    TensorT<Scalar> out = TensorT<Scalar>::scalar(total * scale);
    detail::maybe_record(out, {&a}, [shape = a.shape(), scale](const TensorT<Scalar>& u, const std::vector<bool>&) {
      return std::vector<TensorT<Scalar>>{TensorT<Scalar>::full(shape, u.value() * scale)};
    });
    return out;
  }
  const std::int64_t ax = *axis;
  if (ax < 0 || ax >= a.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(ax) + " out of range for shape " +
                         shape_str(a.shape()));
  }
  const auto span = detail::axis_span(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  Array data = Array::Zero(span.outer * span.inner);
  const auto& src = a.array();
  for (std::int64_t o = 0; o < span.outer; ++o) {
    for (std::int64_t k = 0; k < span.len; ++k) {
      const std::int64_t base = (o * span.len + k) * span.inner;
      for (std::int64_t i = 0; i < span.inner; ++i) data[o * span.inner + i] += src[base + i];
    }
  }
  const Scalar scale = op == ReduceOp::mean ? Scalar(1) / static_cast<Scalar>(span.len) : Scalar(1);
  if (op == ReduceOp::mean) data *= scale;
  TensorT<Scalar> out(out_shape, std::move(data));
  detail::maybe_record(out, {&a},
                       [shape = a.shape(), span, scale](const TensorT<Scalar>& u, const std::vector<bool>&) {
                         Array g(numel(shape));
                         for (std::int64_t o = 0; o < span.outer; ++o) {
                           for (std::int64_t k = 0; k < span.len; ++k) {
                             const std::int64_t base = (o * span.len + k) * span.inner;
                             for (std::int64_t i = 0; i < span.inner; ++i) {
                               g[base + i] = u.array()[o * span.inner + i] * scale;
                             }
                           }
                         }
                         return std::vector<TensorT<Scalar>>{TensorT<Scalar>(shape, std::move(g))};
                       });
  return out;
}

template <typename Scalar>
TensorT<Scalar> sum(const TensorT<Scalar>& a) {
  return reduce(ReduceOp::sum, a);
}
template <typename Scalar>
TensorT<Scalar> sum(const TensorT<Scalar>& a, std::int64_t axis) {
  return reduce(ReduceOp::sum, a, axis);
}
template <typename Scalar>
TensorT<Scalar> mean(const TensorT<Scalar>& a) {
  return reduce(ReduceOp::mean, a);
}
template <typename Scalar>
TensorT<Scalar> mean(const TensorT<Scalar>& a, std::int64_t axis) {
  return reduce(ReduceOp::mean, a, axis);
}

template <typename Scalar>
TensorT<Scalar> operator+(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
TensorT<Scalar> operator-(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  return sub(a, b);
}
template <typename Scalar>
TensorT<Scalar> operator*(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  return mul(a, b);
}
template <typename Scalar>
TensorT<Scalar> operator-(const TensorT<Scalar>& a) {
  return neg(a);
}

// Compares the analytic gradient of f at x against central finite
// differences with step h; returns the maximum relative error
// max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
template <typename Scalar, typename F>
double grad_check(F&& f, const TensorT<Scalar>& x, double h = 1e-5) {
  if (!(h > 0)) throw DomainError("grad_check: h must be positive");
  TensorT<Scalar> probe = x;
  probe.set_grad_tracked(true);
  TensorT<Scalar> analytic;
  {
    TapeT<Scalar> tape;
    tape.watch(probe);
    TensorT<Scalar> y = f(static_cast<const TensorT<Scalar>&>(probe));
    if (y.size() != 1) throw ContractError("grad_check: f must return a scalar");
    if (tape.contains(y)) {
      tape.backward(y);
      analytic = tape.grad(probe);
    } else {
      analytic = TensorT<Scalar>::zeros(x.shape());  // f does not depend on x
    }
  }
  NoGradScope guard;
  double max_err = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    auto plus = x.array();
    auto minus = x.array();
    plus[i] += static_cast<Scalar>(h);
    minus[i] -= static_cast<Scalar>(h);
    const double fp = static_cast<double>(f(TensorT<Scalar>(x.shape(), std::move(plus))).value());
    const double fm = static_cast<double>(f(TensorT<Scalar>(x.shape(), std::move(minus))).value());
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = static_cast<double>(analytic[i]);
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace latentaug
