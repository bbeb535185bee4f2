#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nlos/physics/geometry.hpp"
#include "nlos/tensor/tape.hpp"

namespace nlos::verify {

/// Scalar-valued function of several tensors, written with nlos::ops.
using ScalarFn = std::function<DiffTensor(std::span<const DiffTensor>)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Entries checked per input; inputs with more entries get a seeded
  /// random subset. 0 checks everything.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_error = 0.0;  // max |analytic - fd| / max(1, |fd|)
  std::size_t checked = 0;
  std::size_t worst_input = 0, worst_entry = 0;
};

/// Central differences of `fn` against the tape gradient at `inputs`.
GradCheckResult gradcheck(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                          const GradCheckOptions& opt = {});

/// sum(x * w): reduces any output to a scalar with fixed weights.
DiffTensor project(const DiffTensor& x, const Tensor& weights);

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

struct SuiteEntry {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  bool passed = false;
};

/// Finite-difference checks of every differentiable op, every graph-block
/// stage, the composed block with an output head and the training losses.
std::vector<SuiteEntry> gradient_suite(std::size_t instances, std::uint64_t seed,
                                       double tolerance = 1e-4);

struct AdjointReport {
  std::size_t trials = 0;
  double max_discrepancy = 0.0;  // |<Ax,y> - <x,A^T y>| / (|Ax| |y|)
};

AdjointReport adjoint_check(const physics::SamplingGeometry& g, std::size_t trials,
                            std::uint64_t seed);

}  // namespace nlos::verify
