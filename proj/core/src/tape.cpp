#include "dipa/tape.hpp"

#include <stdexcept>
#include <unordered_set>

namespace dipa {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("use of an unbound Var");
  return tape_->value(index_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(index_); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{"leaf", {}, std::move(value), nullptr, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", {}, std::move(value), nullptr, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* name, std::vector<Var> parents, ForwardFn forward, BackwardFn backward) {
  Node node;
  node.name = name;
  node.parents.reserve(parents.size());
  std::vector<const Tensor*> inputs;
  inputs.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.tape() != this) throw std::logic_error(std::string(name) + ": parent belongs to another tape");
    if (p.index() >= nodes_.size()) throw std::logic_error(std::string(name) + ": parent does not precede node");
    node.parents.push_back(p.index());
    inputs.push_back(&nodes_[p.index()].value);
    node.requires_grad = node.requires_grad || nodes_[p.index()].requires_grad;
  }
  node.value = forward(inputs);
  node.forward = std::move(forward);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<Tensor> Tape::grad(Var loss, std::span<const Var> params) const {
  if (&loss.tape() != this) throw std::invalid_argument("grad: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("grad: loss must be a scalar, got shape " + shape_string(loss.shape()));
  }

  std::unordered_set<std::size_t> keep;
  for (const Var& p : params) keep.insert(p.index());

  const std::size_t last = loss.index();
  std::vector<Tensor> grads(last + 1);
  if (nodes_[last].requires_grad) grads[last] = Tensor(loss.shape(), 1.0);

  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> grad_inputs;
  for (std::size_t i = last + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (grads[i].empty() || !node.backward) continue;
    inputs.clear();
    grad_inputs.clear();
    bool any = false;
    for (std::size_t p : node.parents) {
      if (p >= i) throw std::logic_error("tape order violated at node " + std::to_string(i));
      inputs.push_back(&nodes_[p].value);
      if (nodes_[p].requires_grad) {
        if (grads[p].empty()) grads[p] = Tensor(nodes_[p].value.shape());
        grad_inputs.push_back(&grads[p]);
        any = true;
      } else {
        grad_inputs.push_back(nullptr);
      }
    }
    if (any) node.backward(inputs, node.value, grads[i], grad_inputs);
    if (!keep.contains(i)) grads[i] = Tensor();
  }

  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Var& p : params) {
    if (&p.tape() != this) throw std::invalid_argument("grad: parameter belongs to another tape");
    const std::size_t idx = p.index();
    if (idx <= last && !grads[idx].empty()) {
      out.push_back(grads[idx]);
    } else {
      out.push_back(Tensor(p.shape()));
    }
  }
  return out;
}

bool Tape::replay_matches() const {
  std::vector<const Tensor*> inputs;
  for (const Node& node : nodes_) {
    if (!node.forward) continue;
    inputs.clear();
    for (std::size_t p : node.parents) inputs.push_back(&nodes_[p].value);
    if (!(node.forward(inputs) == node.value)) return false;
  }
  return true;
}

}  // namespace dipa
