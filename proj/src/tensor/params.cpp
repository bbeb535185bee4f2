#include "nlos/tensor/params.hpp"

#include "nlos/common/error.hpp"

namespace nlos {

void ParamSet::add(std::string name, Tensor value) {
  if (index_.count(name) != 0) throw ParameterError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::make_shared<const Tensor>(std::move(value)));
}

void ParamSet::set(const std::string& name, Tensor value) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter: " + name);
  auto& slot = entries_[it->second].second;
  if (slot->shape() != value.shape()) {
    throw DimensionError("parameter " + name + ": shape " + shape_string(value.shape()) +
                         " != " + shape_string(slot->shape()));
  }
  slot = std::make_shared<const Tensor>(std::move(value));
}

const std::shared_ptr<const Tensor>& ParamSet::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::size_t ParamSet::num_scalars() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second->size();
  return n;
}

ParamSet ParamSet::with_prefix_removed(const std::string& prefix) const {
  ParamSet out;
  for (const auto& [name, value] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.add(name.substr(prefix.size()), *value);
  }
  return out;
}

void ParamSet::merge(const ParamSet& other, const std::string& prefix) {
  for (const auto& [name, value] : other.entries_) add(prefix + name, *value);
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].first != b.entries_[i].first) return false;
    if (!(*a.entries_[i].second == *b.entries_[i].second)) return false;
  }
  return true;
}

const DiffTensor& Binder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const auto& value = params_.entry(name);
  DiffTensor t = tape_ != nullptr ? tape_->variable(value) : DiffTensor(value);
  return bound_.emplace(name, std::move(t)).first->second;
}

void Binder::provide(const std::string& name, DiffTensor value) {
  if (!params_.contains(name)) throw ParameterError("Binder::provide: unknown parameter " + name);
  if (value.shape() != params_.get(name).shape()) {
    throw DimensionError("Binder::provide: shape mismatch for " + name);
  }
  bound_.insert_or_assign(name, std::move(value));
}

ParamSet Binder::gradients() const {
  if (tape_ == nullptr) throw ParameterError("Binder::gradients needs a tape");
  ParamSet out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& n = params_.name(i);
    auto it = bound_.find(n);
    out.add(n, it == bound_.end() ? Tensor::zeros(params_.value(i).shape())
                                  : tape_->grad(it->second));
  }
  return out;
}

}  // namespace nlos
