#include "vqad/autodiff/graph.hpp"

#include <sstream>
#include <utility>

#include "vqad/error.hpp"

namespace vqad::ad {

template <typename T>
BasicParameter<T>::BasicParameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

template <typename T>
void BasicParameter<T>::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    grad.fill(T(0));
  }
}

template <typename T>
BasicVar<T> BasicGraph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

template <typename T>
void BasicGraph<T>::check(Var v, std::string_view op) const {
  if (v.graph() != this) {
    throw UsageError(std::string(op) + ": operand belongs to another graph");
  }
  if (v.id() >= nodes_.size()) {
    throw UsageError(std::string(op) + ": operand refers to a released node (missing forward pass)");
  }
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::value(Var v) const {
  check(v, "value");
  return nodes_[v.id()].value;
}

template <typename T>
BasicVar<T> BasicGraph<T>::constant(Tensor value, std::string name) {
  Node node;
  node.op = "constant";
  node.name = std::move(name);
  node.value = std::move(value);
  return push(std::move(node));
}

template <typename T>
BasicVar<T> BasicGraph<T>::variable(Tensor value, std::string name) {
  Node node;
  node.op = "variable";
  node.name = std::move(name);
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

template <typename T>
BasicVar<T> BasicGraph<T>::parameter(Parameter& param) {
  if (!param.value.all_finite()) {
    throw NumericFault("parameter '" + param.name + "' holds non-finite values");
  }
  Node node;
  node.op = "parameter";
  node.name = param.name;
  node.value = param.value;
  node.param = &param;
  node.requires_grad = true;
  return push(std::move(node));
}

template <typename T>
BasicVar<T> BasicGraph<T>::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                  BackwardFn backward) {
  Node node;
  node.op = std::string(op);
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check(in, op);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  if (!node.value.all_finite()) {
    throw NumericFault("non-finite output at node " + std::string(op) + "#" +
                       std::to_string(nodes_.size()));
  }
  backward_done_ = false;
  return push(std::move(node));
}

template <typename T>
BasicVar<T> BasicGraph<T>::record_detached(std::string_view op, Tensor value, std::string name) {
  Node node;
  node.op = std::string(op);
  node.name = std::move(name);
  node.value = std::move(value);
  return push(std::move(node));
}

template <typename T>
BasicTensor<T>& BasicGraph<T>::grad_accumulator(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

template <typename T>
BasicTensor<T> BasicGraph<T>::grad(Var v) const {
  check(v, "grad");
  const Node& node = nodes_[v.id()];
  if (node.grad.shape() != node.value.shape()) return Tensor(node.value.shape());
  return node.grad;
}

template <typename T>
void BasicGraph<T>::backward(Var loss) {
  check(loss, "backward");
  if (backward_done_) {
    throw UsageError("backward: graph was already differentiated; rebuild it with a new forward pass");
  }
  if (nodes_[loss.id()].value.size() != 1) {
    throw UsageError("backward: loss node " + describe(loss.id()) + " is not scalar (shape " +
                     shape_string(nodes_[loss.id()].value.shape()) + ")");
  }
  for (auto& node : nodes_) node.grad = Tensor();
  grad_accumulator(loss.id()).fill(T(1));

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (!node.grad.all_finite()) {
      throw NumericFault("non-finite gradient at node " + describe(id));
    }
    if (node.backward) node.backward(*this, id);
    if (node.param) {
      Parameter& p = *node.param;
      if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
      p.grad.accumulate(node.grad);
    }
  }
  backward_done_ = true;
}

template <typename T>
void BasicGraph<T>::clear() {
  nodes_.clear();
  backward_done_ = false;
}

template <typename T>
std::string BasicGraph<T>::describe(std::size_t id) const {
  std::ostringstream os;
  os << nodes_[id].op << '#' << id;
  if (!nodes_[id].name.empty()) os << " (" << nodes_[id].name << ')';
  return os.str();
}

template struct BasicParameter<float>;
template struct BasicParameter<double>;
template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace vqad::ad
