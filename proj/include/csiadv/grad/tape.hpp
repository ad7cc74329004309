#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "csiadv/errors.hpp"
#include "csiadv/grad/ops.hpp"
#include "csiadv/grad/tensor.hpp"

namespace csiadv::grad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode recorder. Each op evaluates eagerly and pushes a closure that
/// propagates the node's gradient to its inputs. Parameters enter through
/// param(); backward() adds d(loss)/d(param) into Param::grad for every
/// trainable parameter on the tape. Frozen parameters are never differentiated.
template <typename Scalar>
class Tape {
 public:
  using TensorT = Tensor<Scalar>;

  Var constant(TensorT value) { return push(std::move(value), false); }

  /// Leaf input whose gradient can be read back with grad() after backward().
  Var input(TensorT value, bool requires_grad = true) { return push(std::move(value), requires_grad); }

  Var param(Param<Scalar>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
    Var v = push(p.value, p.trainable);
    nodes_[v.id].param = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  Var dense(Var x, Var w, Var b) {
    TensorT y = dense_forward(value(x), value(w), value(b));
    return push_op(std::move(y), {x, w, b}, [x, w, b](Tape& t, const TensorT& dy) {
      dense_backward(t.value(x), t.value(w), dy, t.grad_slot(x), t.grad_slot(w), t.grad_slot(b));
    });
  }

  Var conv2d(Var x, Var k, Var b) {
    TensorT y = conv2d_forward(value(x), value(k), value(b));
    return push_op(std::move(y), {x, k, b}, [x, k, b](Tape& t, const TensorT& dy) {
      conv2d_backward(t.value(x), t.value(k), dy, t.grad_slot(x), t.grad_slot(k), t.grad_slot(b));
    });
  }

  Var leaky_relu(Var x, Scalar alpha) {
    TensorT y = grad::leaky_relu(value(x), alpha);
    return push_op(std::move(y), {x}, [x, alpha](Tape& t, const TensorT& dy) {
      if (auto* dx = t.grad_slot(x)) leaky_relu_backward(t.value(x), alpha, dy, *dx);
    });
  }

  Var sigmoid(Var x) {
    TensorT y = grad::sigmoid(value(x));
    const std::size_t out = nodes_.size();
    return push_op(std::move(y), {x}, [x, out](Tape& t, const TensorT& dy) {
      if (auto* dx = t.grad_slot(x)) sigmoid_backward(t.nodes_[out].value, dy, *dx);
    });
  }

  Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats<Scalar>& stats, BnMode mode) {
    auto cache = std::make_shared<BatchNormCache<Scalar>>();
    TensorT y = batch_norm_forward(value(x), value(gamma), value(beta), stats, mode, cache.get());
    return push_op(std::move(y), {x, gamma, beta}, [x, gamma, beta, cache](Tape& t, const TensorT& dy) {
      batch_norm_backward(*cache, t.value(gamma), dy, t.grad_slot(x), t.grad_slot(gamma),
                          t.grad_slot(beta));
    });
  }

  Var add(Var a, Var b) {
    if (value(a).shape() != value(b).shape()) {
      throw DimensionError("add: " + shape_string(value(a).shape()) + " vs " +
                           shape_string(value(b).shape()));
    }
    TensorT y = value(a);
    y.vec() += value(b).vec();
    return push_op(std::move(y), {a, b}, [a, b](Tape& t, const TensorT& dy) {
      if (auto* da = t.grad_slot(a)) da->vec() += dy.vec();
      if (auto* db = t.grad_slot(b)) db->vec() += dy.vec();
    });
  }

  /// Adds a length-M vector to every row of a B×M (or length-M) activation.
  Var add_rows(Var x, Var bias) {
    const auto [batch, width] = detail::as_rows(value(x).shape(), "add_rows");
    if (value(bias).size() != width) {
      throw DimensionError("add_rows: bias " + shape_string(value(bias).shape()) +
                           " vs activation " + shape_string(value(x).shape()));
    }
    TensorT y = value(x);
    y.matrix(batch, width).rowwise() += value(bias).vec().transpose();
    return push_op(std::move(y), {x, bias}, [x, bias, batch, width](Tape& t, const TensorT& dy) {
      if (auto* dx = t.grad_slot(x)) dx->vec() += dy.vec();
      if (auto* db = t.grad_slot(bias)) {
        const auto dym = dy.matrix(batch, width);
        for (std::size_t j = 0; j < width; ++j) {
          double acc = 0.0;
          for (std::size_t n = 0; n < batch; ++n) acc += static_cast<double>(dym(n, j));
          (*db)[j] += static_cast<Scalar>(acc);
        }
      }
    });
  }

  Var reshape(Var x, Shape shape) {
    TensorT y = value(x).reshaped(std::move(shape));
    return push_op(std::move(y), {x}, [x](Tape& t, const TensorT& dy) {
      if (auto* dx = t.grad_slot(x)) dx->vec() += dy.vec();
    });
  }

  Var scale(Var x, Scalar factor) {
    TensorT y = value(x);
    y.vec() *= factor;
    return push_op(std::move(y), {x}, [x, factor](Tape& t, const TensorT& dy) {
      if (auto* dx = t.grad_slot(x)) dx->vec() += factor * dy.vec();
    });
  }

  /// Scalar node holding mean((pred - target)^2).
  Var mse(Var pred, Var target) {
    TensorT y(Shape{1}, static_cast<Scalar>(mse_loss(value(pred), value(target))));
    return push_op(std::move(y), {pred, target}, [pred, target](Tape& t, const TensorT& dy) {
      mse_loss_backward(t.value(pred), t.value(target), static_cast<double>(dy[0]),
                        t.grad_slot(pred), t.grad_slot(target));
    });
  }

  /// Reverse sweep from a scalar node. Node gradients are rebuilt on every
  /// call; parameter gradients accumulate across calls.
  void backward(Var loss) {
    if (nodes_.empty() || loss.id >= nodes_.size()) {
      throw StateError("backward: no recorded forward pass for this loss node");
    }
    if (nodes_[loss.id].value.size() != 1) {
      throw StateError("backward: loss node must be scalar, got " +
                       shape_string(nodes_[loss.id].value.shape()));
    }
    for (auto& n : nodes_) n.grad = TensorT();
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = TensorT(nodes_[loss.id].value.shape(), Scalar(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    for (auto& n : nodes_) {
      if (n.param && n.param->trainable && !n.grad.empty()) n.param->grad.vec() += n.grad.vec();
    }
  }

  const TensorT& value(Var v) const { return node(v).value; }

  /// Gradient of the last backward() w.r.t. a node (empty if unreachable).
  const TensorT& grad(Var v) const { return node(v).grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear() {
    nodes_.clear();
    param_nodes_.clear();
  }

 private:
  using Backward = std::function<void(Tape&, const TensorT&)>;

  struct Node {
    TensorT value;
    TensorT grad;
    bool requires_grad = false;
    Param<Scalar>* param = nullptr;
    Backward backward;
  };

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw StateError("tape: unknown node");
    return nodes_[v.id];
  }

  Var push(TensorT value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), TensorT(), requires_grad, nullptr, {}});
    return Var{nodes_.size() - 1};
  }

  Var push_op(TensorT value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs_grad = false;
    for (Var in : inputs) needs_grad = needs_grad || node(in).requires_grad;
    Var v = push(std::move(value), needs_grad);
    if (needs_grad) nodes_[v.id].backward = std::move(backward);
    return v;
  }

  // Zero-initialized gradient buffer of an input node, or null if the node
  // does not need a gradient.
  TensorT* grad_slot(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = TensorT::zeros_like(n.value);
    return &n.grad;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Param<Scalar>*, std::size_t> param_nodes_;
};

}  // namespace csiadv::grad
