#include "nlos/verify/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nlos/common/error.hpp"
#include "nlos/common/rng.hpp"
#include "nlos/physics/transport.hpp"

namespace nlos::verify {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  std::vector<DiffTensor> args;
  args.reserve(inputs.size());
  for (const Tensor& t : inputs) args.emplace_back(t);
  const DiffTensor out = fn(args);
  if (out.size() != 1) throw DimensionError("gradcheck: function must return one value");
  return out.value()[0];
}

std::vector<std::size_t> entries(std::size_t n, std::size_t max_entries, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (max_entries == 0 || max_entries >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult gradcheck(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                          const GradCheckOptions& opt) {
  Tape tape;
  std::vector<DiffTensor> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  const DiffTensor out = fn(vars);
  if (out.size() != 1) throw DimensionError("gradcheck: function must return one value");
  if (!out.tracked()) throw ParameterError("gradcheck: output does not depend on the inputs");
  tape.backward(out);

  GradCheckResult res;
  Rng rng(opt.seed);
  std::vector<Tensor> work = inputs;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    const Tensor& analytic = tape.grad(vars[a]);
    for (std::size_t i : entries(inputs[a].size(), opt.max_entries, rng)) {
      const double orig = work[a][i];
      work[a][i] = orig + opt.step;
      const double up = evaluate(fn, work);
      work[a][i] = orig - opt.step;
      const double down = evaluate(fn, work);
      work[a][i] = orig;
      const double fd = (up - down) / (2.0 * opt.step);
      const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
      if (err > res.max_error || res.checked == 0) {
        res.max_error = err;
        res.worst_input = a;
        res.worst_entry = i;
      }
      ++res.checked;
    }
  }
  return res;
}

AdjointReport adjoint_check(const physics::SamplingGeometry& g, std::size_t trials,
                            std::uint64_t seed) {
  const physics::TransportOperator op(g);
  AdjointReport rep;
  rep.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor x = random_tensor(g.volume_shape(), derive_seed(seed, 2 * t), 0.0, 1.0);
    const Tensor y = random_tensor(g.measurement_shape(), derive_seed(seed, 2 * t + 1), 0.0, 1.0);
    const Tensor ax = op.forward(x);
    const Tensor aty = op.adjoint(y);
    double lhs = 0.0, rhs = 0.0, nax = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
      lhs += ax[i] * y[i];
      nax += ax[i] * ax[i];
      ny += y[i] * y[i];
    }
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    const double denom = std::sqrt(nax) * std::sqrt(ny);
    const double d = denom > 0.0 ? std::abs(lhs - rhs) / denom : std::abs(lhs - rhs);
    rep.max_discrepancy = std::max(rep.max_discrepancy, d);
  }
  return rep;
}

}  // namespace nlos::verify
