#ifndef SIMSIAM_TAPE_HPP
#define SIMSIAM_TAPE_HPP

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "simsiam/tensor.hpp"

namespace simsiam {

enum class OpKind : std::uint8_t {
  leaf,
  affine,
  add,
  sub,
  mul,
  relu,
  batchnorm,
  l2_normalize,
  softmax,
  log_softmax,
  log,
  sum,
  mean,
  scale,
  concat_rows,
  conv2d,
  avg_pool2d,
  global_avg_pool,
  nchw_to_rows,
  rows_to_nchw,
  stop_gradient,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::affine: return "affine";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::relu: return "relu";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::l2_normalize: return "l2_normalize";
    case OpKind::softmax: return "softmax";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::log: return "log";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::scale: return "scale";
    case OpKind::concat_rows: return "concat_rows";
    case OpKind::conv2d: return "conv2d";
    case OpKind::avg_pool2d: return "avg_pool2d";
    case OpKind::global_avg_pool: return "global_avg_pool";
    case OpKind::nchw_to_rows: return "nchw_to_rows";
    case OpKind::rows_to_nchw: return "rows_to_nchw";
    case OpKind::stop_gradient: return "stop_gradient";
  }
  return "?";
}

template <typename Scalar>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<Scalar>& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Named trainable tensor owned by a layer; bound onto a tape per step.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  bool trainable = true;
};

// One recorded operation. The values needed by the backward rule are either
// read back from parent nodes or captured in the backward closure.
template <typename Scalar>
struct TapeNode {
  OpKind kind = OpKind::leaf;
  std::vector<std::int32_t> parent_ids;
  Tensor<Scalar> value;
  bool grad_blocked = false;   // true exactly for stop-gradient nodes
  bool requires_grad = false;  // some requires-grad leaf is reachable upstream
  // Accumulates parent gradients given this node's output gradient.
  std::function<void(Tape<Scalar>&, const Tensor<Scalar>&)> backward;
};

// Gradients of a scalar loss with respect to every requires-grad leaf of the
// tape (zero-filled for leaves the loss does not reach), keyed by leaf id.
template <typename Scalar>
class GradStore {
 public:
  bool contains(Var<Scalar> v) const { return grads_.count(v.id) != 0; }

  const Tensor<Scalar>& at(Var<Scalar> v) const {
    auto it = grads_.find(v.id);
    if (it == grads_.end())
      throw std::out_of_range("GradStore: no gradient recorded for node " + std::to_string(v.id));
    return it->second;
  }

  std::size_t size() const { return grads_.size(); }

  void insert(std::int32_t id, Tensor<Scalar> g) { grads_.emplace(id, std::move(g)); }

 private:
  std::unordered_map<std::int32_t, Tensor<Scalar>> grads_;
};

// Define-by-run tape: rebuilt every step, nodes in topological order by
// construction (parents always precede children).
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<Scalar>&)>;
  struct Binding {
    Parameter<Scalar>* param;
    Var<Scalar> var;
  };

  Var<Scalar> leaf(Tensor<Scalar> value, bool requires_grad = false) {
    check_finite(value, "leaf");
    TapeNode<Scalar> n;
    n.kind = OpKind::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Var<Scalar> constant(Tensor<Scalar> value) { return leaf(std::move(value), false); }

  // Bind a parameter as a leaf and remember the association for the
  // optimizer. Rebinding the same parameter returns the existing leaf, so a
  // weight-shared branch accumulates into one node and the optimizer sees
  // each parameter exactly once. Non-trainable parameters participate in the
  // forward pass but never appear in a GradStore.
  Var<Scalar> param(Parameter<Scalar>& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var<Scalar>{this, it->second};
    Var<Scalar> v = leaf(p.value, p.trainable);
    param_ids_.emplace(&p, v.id);
    bindings_.push_back({&p, v});
    return v;
  }

  const std::vector<Binding>& bindings() const { return bindings_; }

  Var<Scalar> emit(OpKind kind, std::vector<std::int32_t> parents, Tensor<Scalar> value,
                   BackwardFn backward, bool grad_blocked = false) {
    check_finite(value, op_name(kind));
    TapeNode<Scalar> n;
    n.kind = kind;
    n.grad_blocked = grad_blocked;
    bool rg = false;
    for (std::int32_t p : parents) {
      if (p < 0 || p >= static_cast<std::int32_t>(nodes_.size()))
        throw std::logic_error("Tape::emit: parent id out of order (cycle or cross-tape use)");
      rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
    }
    n.requires_grad = rg && !grad_blocked;
    n.parent_ids = std::move(parents);
    n.value = std::move(value);
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const TapeNode<Scalar>& node(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)];
  }
  const Tensor<Scalar>& value(std::int32_t id) const { return node(id).value; }
  bool requires_grad(std::int32_t id) const { return node(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar loss node. Deterministic for a fixed
  // tape: nodes are visited in strictly decreasing id order.
  GradStore<Scalar> backward(Var<Scalar> loss) {
    if (loss.tape != this) throw std::logic_error("backward: loss lives on a different tape");
    if (value(loss.id).numel() != 1)
      throw ShapeError("backward: loss must be scalar, shape " +
                       shape_str(value(loss.id).shape()));
    grads_.assign(nodes_.size(), Tensor<Scalar>());
    accumulate(loss.id, Tensor<Scalar>::ones({1}));
    for (std::int32_t id = loss.id; id >= 0; --id) {
      auto& n = nodes_[static_cast<std::size_t>(id)];
      if (grads_[static_cast<std::size_t>(id)].numel() == 0) continue;
      if (n.grad_blocked) continue;  // stop-gradient: zero flow to ancestors
      if (n.backward) n.backward(*this, grads_[static_cast<std::size_t>(id)]);
    }
    GradStore<Scalar> store;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.kind != OpKind::leaf || !n.requires_grad) continue;
      Tensor<Scalar>& g = grads_[i];
      store.insert(static_cast<std::int32_t>(i),
                   g.numel() ? std::move(g) : Tensor<Scalar>::zeros(n.value.shape()));
    }
    grads_.clear();
    return store;
  }

  // Called by backward rules to push gradient into a parent.
  void accumulate(std::int32_t id, const Tensor<Scalar>& g) {
    Tensor<Scalar>& slot = grads_[static_cast<std::size_t>(id)];
    if (slot.numel() == 0) {
      slot = g;
    } else {
      slot.flat() += g.flat();
    }
  }
  void accumulate(std::int32_t id, Tensor<Scalar>&& g) {
    Tensor<Scalar>& slot = grads_[static_cast<std::size_t>(id)];
    if (slot.numel() == 0) {
      slot = std::move(g);
    } else {
      slot.flat() += g.flat();
    }
  }

  // --- stop-gradient capture/replay, used by the finite-difference oracle ---
  // In replay mode the k-th stop_gradient node reproduces the k-th captured
  // output, so numeric differentiation sees the blocked branch as constant.
  void capture_stopgrad(std::vector<Tensor<Scalar>>* sink) {
    sg_sink_ = sink;
    sg_source_ = nullptr;
    sg_cursor_ = 0;
  }
  void replay_stopgrad(const std::vector<Tensor<Scalar>>* source) {
    sg_source_ = source;
    sg_sink_ = nullptr;
    sg_cursor_ = 0;
  }
  bool sg_replaying() const { return sg_source_ != nullptr; }
  Tensor<Scalar> sg_next_replay(const Shape& expect) {
    const Tensor<Scalar>& t = (*sg_source_)[sg_cursor_++];
    if (t.shape() != expect)
      throw std::logic_error("stop-gradient replay: graph shape changed between runs");
    return t;
  }
  void sg_record(const Tensor<Scalar>& t) {
    if (sg_sink_) sg_sink_->push_back(t);
  }

 private:
  Var<Scalar> push(TapeNode<Scalar> n) {
    nodes_.push_back(std::move(n));
    return Var<Scalar>{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  static void check_finite(const Tensor<Scalar>& t, const char* who) {
    if (!t.all_finite())
      throw NonFiniteError(std::string(who) + ": non-finite values in forward output");
  }

  std::vector<TapeNode<Scalar>> nodes_;
  std::vector<Binding> bindings_;
  std::unordered_map<const Parameter<Scalar>*, std::int32_t> param_ids_;
  std::vector<Tensor<Scalar>> grads_;  // scratch during backward

  std::vector<Tensor<Scalar>>* sg_sink_ = nullptr;
  const std::vector<Tensor<Scalar>>* sg_source_ = nullptr;
  std::size_t sg_cursor_ = 0;
};

template <typename Scalar>
const Tensor<Scalar>& Var<Scalar>::value() const {
  return tape->value(id);
}

}  // namespace simsiam

#endif  // SIMSIAM_TAPE_HPP
