#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqad/autodiff/tensor.hpp"

namespace vqad::ad {

/// A trainable tensor with its accumulated gradient. Graphs reference
/// parameters by address, so parameters must outlive the graphs using them.
template <typename T>
struct BasicParameter {
  using Tensor = BasicTensor<T>;

  BasicParameter() = default;
  BasicParameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad();
};

template <typename T>
class BasicGraph;

/// Handle to a node of a graph.
template <typename T>
class BasicVar {
 public:
  using Tensor = BasicTensor<T>;
  using Graph = BasicGraph<T>;

  BasicVar() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class BasicGraph<T>;
  BasicVar(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run tape. Every op evaluates eagerly and appends a node; node
/// ids are a topological order by construction.
template <typename T>
class BasicGraph {
 public:
  using Tensor = BasicTensor<T>;
  using Var = BasicVar<T>;
  using Parameter = BasicParameter<T>;
  using Graph = BasicGraph<T>;
  /// Called once during backward with the node id; reads grad(node) and
  /// accumulates into the gradients of the node's inputs.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  BasicGraph() = default;
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  Var constant(Tensor value, std::string name = {});
  Var variable(Tensor value, std::string name = {});
  Var parameter(Parameter& param);

  /// Appends an op node. Throws NumericFault if the value is not finite.
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward) {
    return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }
  /// Appends a node that carries its value but blocks gradient flow.
  Var record_detached(std::string_view op, Tensor value, std::string name = {});

  /// Reverse sweep from a scalar node. Parameter gradients are accumulated
  /// into Parameter::grad.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const;
  /// Gradient of the last backward pass w.r.t. a node (zeros if none flowed).
  Tensor grad(Var v) const;

  // Accessors for backward functions.
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  Tensor& grad_accumulator(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t input(std::size_t node, std::size_t k) const { return nodes_[node].inputs[k]; }

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Releases every node; handles into this graph become invalid.
  void clear();
  std::string describe(std::size_t id) const;

  /// Checks that a handle belongs to this graph and is still live.
  void check(Var v, std::string_view op) const;

 private:
  struct Node {
    std::string op;
    std::string name;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

template <typename T>
const BasicTensor<T>& BasicVar<T>::value() const {
  if (!graph_) throw UsageError("var: null handle");
  return graph_->value(*this);
}

using Parameter = BasicParameter<float>;
using Var = BasicVar<float>;
using Graph = BasicGraph<float>;
using GraphD = BasicGraph<double>;
using VarD = BasicVar<double>;

extern template struct BasicParameter<float>;
extern template struct BasicParameter<double>;
extern template class BasicGraph<float>;
extern template class BasicGraph<double>;

}  // namespace vqad::ad
