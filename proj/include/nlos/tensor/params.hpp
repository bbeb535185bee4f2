#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nlos/tensor/tape.hpp"

namespace nlos {

/// Named tensors in insertion order. Values are immutable once stored;
/// set() swaps in a new value, so bound DiffTensors never observe updates.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  void set(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const { return *entry(name); }
  const std::shared_ptr<const Tensor>& entry(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_.at(i).first; }
  const Tensor& value(std::size_t i) const { return *entries_.at(i).second; }
  std::size_t num_scalars() const noexcept;

  /// Entries whose name starts with `prefix`, with the prefix stripped.
  ParamSet with_prefix_removed(const std::string& prefix) const;
  /// Appends every entry of `other` under `prefix`.
  void merge(const ParamSet& other, const std::string& prefix);

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<std::pair<std::string, std::shared_ptr<const Tensor>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Hands out parameters as DiffTensors: tape variables when a tape is given,
/// constants otherwise. Each name is bound once per binder.
class Binder {
 public:
  Binder(const ParamSet& params, Tape* tape) : params_(params), tape_(tape) {}

  const DiffTensor& operator()(const std::string& name);
  /// Binds `name` to an existing tensor instead of the stored value.
  void provide(const std::string& name, DiffTensor value);
  const ParamSet& params() const noexcept { return params_; }
  Tape* tape() const noexcept { return tape_; }

  /// Gradient for every parameter (zeros for those never bound) after
  /// tape->backward(). Requires a tape.
  ParamSet gradients() const;

 private:
  const ParamSet& params_;
  Tape* tape_;
  std::unordered_map<std::string, DiffTensor> bound_;
};

}  // namespace nlos
