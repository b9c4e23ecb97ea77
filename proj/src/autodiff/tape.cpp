#include "metroflow/autodiff/tape.hpp"

#include "metroflow/error.hpp"

namespace metroflow {

const Tensor& Var::value() const { return tape_->nodes_[id_].value; }
const Tensor& Var::grad() const { return tape_->nodes_[id_].grad; }
bool Var::requires_grad() const { return tape_->nodes_[id_].requires_grad; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    fail(ErrorCategory::contract, "variable does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::parameter(Parameter& parameter) {
  if (!parameter.grad.same_shape(parameter.value)) parameter.grad = Tensor::zeros_like(parameter.value);
  Node node;
  node.value = parameter.value;
  if (track_gradients_) {
    node.requires_grad = true;
    node.parameter = &parameter;
  }
  return push(std::move(node));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (Var in : inputs) {
    check_owned(in);
    needs_grad = needs_grad || nodes_[in.id_].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Tensor* Tape::grad_sink(Var v) {
  Node& node = nodes_[v.id_];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor::zeros_like(node.value);
  return &node.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (backward_done_) fail(ErrorCategory::contract, "backward already ran on this tape");
  const Tensor& lv = nodes_[loss.id_].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    fail(ErrorCategory::contract, "backward needs a scalar loss, got " + lv.shape_string());
  }
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Tensor(1, 1, 1.0);

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.parameter != nullptr) {
      auto dst = node.parameter->grad.values();
      auto src = node.grad.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    } else if (node.backward) {
      node.backward(*this, node.grad);
    }
  }
}

}  // namespace metroflow
