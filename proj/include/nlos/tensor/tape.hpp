#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "nlos/tensor/tensor.hpp"

namespace nlos {

class Tape;

/// A tensor value that may be tracked by a Tape. Untracked values are
/// constants: ops on them compute forward values and record nothing.
class DiffTensor {
 public:
  DiffTensor() = default;
  explicit DiffTensor(Tensor value);
  explicit DiffTensor(std::shared_ptr<const Tensor> value);

  bool defined() const noexcept { return value_ != nullptr; }
  const Tensor& value() const noexcept { return *value_; }
  const std::shared_ptr<const Tensor>& shared_value() const noexcept { return value_; }
  const Shape& shape() const noexcept { return value_->shape(); }
  std::size_t size() const noexcept { return value_->size(); }
  std::size_t dim(std::size_t axis) const { return value_->dim(axis); }

  bool tracked() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t node() const noexcept { return node_; }

  /// Untracked copy sharing the same value.
  DiffTensor detached() const { return DiffTensor(value_); }

 private:
  friend class Tape;
  std::shared_ptr<const Tensor> value_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Backward rule of one recorded op. `input_grads[i]` is null when input i is
/// a constant; otherwise the rule must *accumulate* into it.
using BackwardFn =
    std::function<void(const Tensor& upstream, std::span<Tensor* const> input_grads)>;

/// Ordered record of differentiable operations. Single writer.
class Tape {
 public:
  static constexpr std::size_t kConstant = std::numeric_limits<std::size_t>::max();

  struct Record {
    std::string_view op;
    std::vector<std::size_t> inputs;  // kConstant for untracked inputs
    std::size_t output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  DiffTensor variable(Tensor value);
  DiffTensor variable(std::shared_ptr<const Tensor> value);

  /// Appends an op whose inputs were all created before it.
  DiffTensor record(std::string_view op, std::span<const DiffTensor> inputs, Tensor output,
                    BackwardFn backward);

  /// Reverse sweep from a single-element root. Leaf gradients accumulate across
  /// calls until clear_grads(); intermediate gradients are reset per call.
  void backward(const DiffTensor& root);
  void clear_grads();

  /// Gradient of a node of this tape; a zero tensor if nothing reached it.
  const Tensor& grad(const DiffTensor& x) const;

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_records() const noexcept { return records_.size(); }
  const Record& record_at(std::size_t i) const { return records_.at(i); }
  bool is_leaf(std::size_t node) const { return nodes_.at(node).leaf; }

  /// Number of records visited by the last backward() call.
  std::size_t last_visit_count() const noexcept { return last_visits_; }

 private:
  struct Node {
    Shape shape;
    bool leaf;
  };

  std::size_t add_node(const Shape& shape, bool leaf);
  Tensor& grad_slot(std::size_t node);

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  mutable std::vector<Tensor> grads_;
  mutable std::vector<bool> has_grad_;
  std::size_t last_visits_ = 0;
};

}  // namespace nlos
