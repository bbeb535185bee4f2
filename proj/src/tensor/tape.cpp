#include "nlos/tensor/tape.hpp"

#include <string>

#include "nlos/common/error.hpp"

namespace nlos {

DiffTensor::DiffTensor(Tensor value) : value_(std::make_shared<const Tensor>(std::move(value))) {}

DiffTensor::DiffTensor(std::shared_ptr<const Tensor> value) : value_(std::move(value)) {}

std::size_t Tape::add_node(const Shape& shape, bool leaf) {
  nodes_.push_back(Node{shape, leaf});
  grads_.emplace_back();
  has_grad_.push_back(false);
  return nodes_.size() - 1;
}

DiffTensor Tape::variable(Tensor value) {
  return variable(std::make_shared<const Tensor>(std::move(value)));
}

DiffTensor Tape::variable(std::shared_ptr<const Tensor> value) {
  if (!value) throw ParameterError("tape variable needs a value");
  DiffTensor t(std::move(value));
  t.tape_ = this;
  t.node_ = add_node(t.shape(), true);
  return t;
}

DiffTensor Tape::record(std::string_view op, std::span<const DiffTensor> inputs, Tensor output,
                        BackwardFn backward) {
  Record r{op, {}, 0, std::move(backward)};
  r.inputs.reserve(inputs.size());
  for (const DiffTensor& in : inputs) {
    if (!in.tracked()) {
      r.inputs.push_back(kConstant);
      continue;
    }
    if (in.tape() != this) throw ParameterError(std::string(op) + ": input from another tape");
    r.inputs.push_back(in.node());
  }
  DiffTensor out(std::move(output));
  out.tape_ = this;
  out.node_ = add_node(out.shape(), false);
  r.output = out.node_;
  records_.push_back(std::move(r));
  return out;
}

Tensor& Tape::grad_slot(std::size_t node) {
  if (!has_grad_[node]) {
    grads_[node] = Tensor::zeros(nodes_[node].shape);
    has_grad_[node] = true;
  }
  return grads_[node];
}

void Tape::backward(const DiffTensor& root) {
  if (!root.tracked() || root.tape() != this) {
    throw ParameterError("backward: root is not recorded on this tape");
  }
  if (root.size() != 1) {
    throw DimensionError("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].leaf && has_grad_[i]) {
      grads_[i] = Tensor();
      has_grad_[i] = false;
    }
  }
  grad_slot(root.node())[0] += 1.0;

  last_visits_ = 0;
  std::vector<Tensor*> slots;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output > root.node() || !has_grad_[it->output]) continue;
    slots.clear();
    for (std::size_t in : it->inputs) slots.push_back(in == kConstant ? nullptr : &grad_slot(in));
    it->backward(grads_[it->output], slots);
    ++last_visits_;
  }
}

void Tape::clear_grads() {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    grads_[i] = Tensor();
    has_grad_[i] = false;
  }
}

const Tensor& Tape::grad(const DiffTensor& x) const {
  if (!x.tracked() || x.tape() != this) throw ParameterError("grad: tensor not on this tape");
  if (!has_grad_[x.node()]) {
    grads_[x.node()] = Tensor::zeros(nodes_[x.node()].shape);
    has_grad_[x.node()] = true;
  }
  return grads_[x.node()];
}

}  // namespace nlos
