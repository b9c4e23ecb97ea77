#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

#include "metroflow/autodiff/tensor.hpp"

namespace metroflow {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Accumulated gradient after Tape::backward. Empty if nothing flowed here.
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Define-by-run reverse-mode tape. Operations append nodes in execution order,
// so the node list is already topologically sorted; backward walks it once in
// reverse. A tape is single-threaded and supports one backward pass.
class Tape {
 public:
  /// Receives the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  /// With track_gradients off, parameters bind as constants and nothing is
  /// recorded for backward (inference).
  explicit Tape(bool track_gradients = true) : track_gradients_(track_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that collects its gradient on the tape (read it back with Var::grad).
  Var variable(Tensor value);
  /// Leaf bound to a Parameter; backward adds into parameter.grad. The
  /// parameter must outlive the tape.
  Var parameter(Parameter& parameter);

  /// Appends an operation output. The node requires grad iff any input does;
  /// otherwise the backward rule is dropped.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  void backward(Var loss);

  /// Gradient buffer to accumulate into, or nullptr if the var needs no grad.
  Tensor* grad_sink(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* parameter = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  bool track_gradients_ = true;
  bool backward_done_ = false;
};

}  // namespace metroflow
