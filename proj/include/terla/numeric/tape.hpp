#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "terla/numeric/tensor.hpp"

namespace terla::numeric {

template <typename T>
class BasicParameter {
 public:
  BasicParameter() = default;
  BasicParameter(std::string name, BasicTensor<T> value)
      : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape()) {}

  const std::string& name() const { return name_; }
  const BasicTensor<T>& value() const { return value_; }
  BasicTensor<T>& value() { return value_; }
  const BasicTensor<T>& grad() const { return grad_; }
  BasicTensor<T>& grad() { return grad_; }
  const Shape& shape() const { return value_.shape(); }

  // Replaces the value; the gradient is reshaped and cleared with it.
  void assign(BasicTensor<T> value) {
    value_ = std::move(value);
    grad_ = BasicTensor<T>(value_.shape());
  }

  void zero_grad() { grad_.fill(T{0}); }

 private:
  std::string name_;
  BasicTensor<T> value_;
  BasicTensor<T> grad_;
};

using Parameter = BasicParameter<float>;

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const BasicTensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Dynamic record of one forward pass. Operations push nodes in execution
// order; backward() walks them in exact reverse order.
template <typename T>
class Tape {
 public:
  using Tensor = BasicTensor<T>;
  // Receives the tape and the id of the node whose gradient is final.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, {}, nullptr, false});
    return Var<T>(this, nodes_.size() - 1);
  }

  // Leaf bound to a parameter; gradients flow into parameter.grad() on backward.
  Var<T> parameter(BasicParameter<T>& p) {
    nodes_.push_back(Node{{}, &p.value(), {}, {}, &p, record_});
    return Var<T>(this, nodes_.size() - 1);
  }

  // Leaf that takes part in differentiation without being a parameter;
  // its gradient is readable through grad() after backward.
  Var<T> variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, {}, nullptr, record_});
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> push(Tensor value, std::initializer_list<std::size_t> inputs, BackwardFn fn) {
    bool needs = false;
    if (record_) {
      for (std::size_t in : inputs) needs = needs || nodes_[in].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(fn) : BackwardFn{},
                          nullptr, needs});
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> push(Tensor value, const std::vector<std::size_t>& inputs, BackwardFn fn) {
    bool needs = false;
    if (record_) {
      for (std::size_t in : inputs) needs = needs || nodes_[in].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(fn) : BackwardFn{},
                          nullptr, needs});
    return Var<T>(this, nodes_.size() - 1);
  }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient buffer of a node, allocated on first use.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != value(id).size()) n.grad = Tensor(value(id).shape());
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty() || value(id).empty(); }

  void backward(Var<T> loss) {
    if (loss.value().size() != 1) {
      throw DimensionError("backward needs a scalar loss, got shape " +
                           shape_str(loss.value().shape()));
    }
    if (!record_) throw Error("backward on a tape that does not record gradients");
    trace_.clear();
    grad(loss.id()).fill(T{1});
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) {
        trace_.push_back(i);
        n.backward(*this, i);
      }
      if (n.param) {
        auto& g = n.param->grad();
        const auto& src = nodes_[i].grad;
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += src[j];
      }
    }
  }

  // Node ids whose backward functions ran during the last backward(), in call order.
  const std::vector<std::size_t>& backward_trace() const { return trace_; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external;
    Tensor grad;
    BackwardFn backward;
    BasicParameter<T>* param;
    bool needs_grad;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> trace_;
};

}  // namespace terla::numeric
