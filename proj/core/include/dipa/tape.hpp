#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dipa/tensor.hpp"

namespace dipa {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Tape& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Recomputes a node value from its parents' values.
using ForwardFn = std::function<Tensor(std::span<const Tensor* const> inputs)>;

// Accumulates vector-Jacobian products into grad_inputs. Entries are null for
// parents that do not require gradients.
using BackwardFn = std::function<void(std::span<const Tensor* const> inputs, const Tensor& output,
                                      const Tensor& grad_output, std::span<Tensor* const> grad_inputs)>;

// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
// so every node's parents precede it. Single writer: one solve and one
// backward pass per tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);      // differentiable input
  Var constant(Tensor value);  // never receives a gradient

  // Evaluates forward on the parents' values and appends the result.
  Var record(const char* name, std::vector<Var> parents, ForwardFn forward, BackwardFn backward);

  // dLoss/dParam for each param. Params that the loss does not reach get
  // zero tensors of matching shape. Throws if loss is not a scalar.
  std::vector<Tensor> grad(Var loss, std::span<const Var> params) const;

  // Re-runs every recorded forward and compares with the cached values.
  bool replay_matches() const;

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t index) const { return nodes_[index].value; }
  const std::string& name(std::size_t index) const { return nodes_[index].name; }
  bool requires_grad(std::size_t index) const { return nodes_[index].requires_grad; }

 private:
  struct Node {
    std::string name;
    std::vector<std::size_t> parents;
    Tensor value;
    ForwardFn forward;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

}  // namespace dipa
