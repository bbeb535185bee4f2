#include <algorithm>
#include <numeric>

#include "nlos/graph/block.hpp"
#include "nlos/network/network.hpp"
#include "nlos/tensor/ops.hpp"
#include "nlos/training/training.hpp"
#include "nlos/verify/gradcheck.hpp"

namespace nlos::verify {

DiffTensor project(const DiffTensor& x, const Tensor& weights) {
  return ops::sum(ops::mul(x, DiffTensor(weights)));
}

namespace {

using Args = std::span<const DiffTensor>;

struct Instance {
  ScalarFn fn;
  std::vector<Tensor> inputs;
  std::size_t max_entries = 0;
};

using Builder = std::function<Instance(std::uint64_t seed)>;

struct Case {
  std::string name;
  Builder build;
};

// Seeds for the pieces of one instance.
struct Seeds {
  std::uint64_t base;
  std::uint64_t operator()(std::uint64_t i) const { return derive_seed(base, i); }
};

// Elementwise op with the output reduced by fixed random weights.
Case unary(std::string name, DiffTensor (*op)(const DiffTensor&), double lo = -2.0,
           double hi = 2.0) {
  return {std::move(name), [op, lo, hi](std::uint64_t seed) {
            Seeds s{seed};
            Tensor w = random_tensor({3, 5}, s(1));
            return Instance{[op, w](Args a) { return project(op(a[0]), w); },
                            {random_tensor({3, 5}, s(0), lo, hi)}};
          }};
}

// Values away from zero, for |x|.
Tensor away_from_zero(Shape shape, std::uint64_t seed) {
  Tensor t = random_tensor(std::move(shape), seed, 0.1, 1.0);
  Rng rng(derive_seed(seed, 99));
  for (double& v : t.data()) v = uniform(rng, 0.0, 1.0) < 0.5 ? -v : v;
  return t;
}

// Distinct values spaced >= 0.08 apart in random order, so max has no near ties.
Tensor tie_free(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = 0.1 * static_cast<double>(order[i]) + uniform(rng, -0.01, 0.01);
  }
  return t;
}

graph::GraphBlockConfig small_block(graph::Aggregation variant) {
  graph::GraphBlockConfig cfg;
  cfg.channels = 4;
  cfg.variant = variant;
  return cfg;
}

// Block parameters as trailing gradcheck inputs, re-bound by name inside fn.
struct BlockInputs {
  std::vector<std::string> names;
  ParamSet params;
};

BlockInputs block_inputs(const graph::GraphBlockConfig& cfg, std::uint64_t seed) {
  BlockInputs b;
  Rng rng(seed);
  graph::init_graph_block(b.params, "", cfg, rng);
  // Non-trivial norm parameters so their gradients are exercised too.
  b.params.set("fusion.norm_gain", random_tensor({cfg.channels}, derive_seed(seed, 7), 0.5, 1.5));
  b.params.set("fusion.norm_bias", random_tensor({cfg.channels}, derive_seed(seed, 8), -0.5, 0.5));
  for (std::size_t i = 0; i < b.params.size(); ++i) b.names.push_back(b.params.name(i));
  return b;
}

graph::GraphBlockWeights rebind(const BlockInputs& b, const graph::GraphBlockConfig& cfg,
                                Args a, std::size_t first) {
  Binder bind(b.params, nullptr);
  for (std::size_t i = 0; i < b.names.size(); ++i) bind.provide(b.names[i], a[first + i]);
  return graph::bind_graph_block(bind, "", cfg);
}

void append_params(std::vector<Tensor>& inputs, const BlockInputs& b) {
  for (std::size_t i = 0; i < b.params.size(); ++i) inputs.push_back(b.params.value(i));
}

std::vector<Case> cases() {
  std::vector<Case> c;

  c.push_back({"matmul", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({3, 2}, s(2));
                 return Instance{[w](Args a) { return project(ops::matmul(a[0], a[1]), w); },
                                 {random_tensor({3, 4}, s(0)), random_tensor({4, 2}, s(1))}};
               }});
  c.push_back({"add/sub/mul/scale", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({4, 3}, s(2));
                 return Instance{[w](Args a) {
                                   const DiffTensor t = ops::mul(ops::add(a[0], a[1]), ops::sub(a[0], a[1]));
                                   return project(ops::scale(ops::add(t, a[0]), 1.7), w);
                                 },
                                 {random_tensor({4, 3}, s(0)), random_tensor({4, 3}, s(1))}};
               }});
  c.push_back(unary("silu", &ops::silu, -4.0, 4.0));
  c.push_back(unary("gelu", &ops::gelu, -4.0, 4.0));
  c.push_back(unary("softplus", &ops::softplus, -6.0, 6.0));
  c.push_back(unary("square", &ops::square));
  c.push_back({"abs", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({3, 5}, s(1));
                 return Instance{[w](Args a) { return project(ops::abs(a[0]), w); },
                                 {away_from_zero({3, 5}, s(0))}};
               }});
  c.push_back({"sum/reduce_sum", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w0 = random_tensor({3, 5}, s(1)), w2 = random_tensor({2, 3}, s(2));
                 return Instance{[w0, w2](Args a) {
                                   return ops::add(ops::sum(ops::square(a[0])),
                                                   ops::add(project(ops::reduce_sum(a[0], 0), w0),
                                                            project(ops::reduce_sum(a[0], 2), w2)));
                                 },
                                 {random_tensor({2, 3, 5}, s(0))}};
               }});
  c.push_back({"reduce_max_arg", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({4, 5}, s(1));
                 return Instance{[w](Args a) { return project(ops::reduce_max_arg(a[0], 1).values, w); },
                                 {tie_free({4, 3, 5}, s(0))}};
               }});
  c.push_back({"softmax", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({5, 2, 3}, s(1));
                 return Instance{[w](Args a) { return project(ops::softmax(a[0], 0), w); },
                                 {random_tensor({5, 2, 3}, s(0), -3.0, 3.0)}};
               }});
  c.push_back({"reshape/permute", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({4, 2, 3}, s(1));
                 return Instance{[w](Args a) {
                                   const std::size_t axes[] = {2, 0, 1};
                                   const DiffTensor r = ops::reshape(a[0], {2, 3, 4});
                                   return project(ops::square(ops::permute(r, axes)), w);
                                 },
                                 {random_tensor({6, 4}, s(0))}};
               }});
  c.push_back({"concat/split", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w0 = random_tensor({1, 3, 3}, s(2)), w1 = random_tensor({4, 3, 3}, s(3));
                 return Instance{[w0, w1](Args a) {
                                   const DiffTensor xs[] = {a[0], ops::square(a[1])};
                                   const DiffTensor cat = ops::channel_concat(xs);
                                   const std::size_t ext[] = {1, 4};
                                   const auto parts = ops::channel_split(cat, ext);
                                   return ops::add(project(parts[0], w0), project(ops::silu(parts[1]), w1));
                                 },
                                 {random_tensor({2, 3, 3}, s(0)), random_tensor({3, 3, 3}, s(1))}};
               }});
  c.push_back({"gather_rows", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({7, 3}, s(1));
                 return Instance{[w](Args a) {
                                   const std::size_t rows[] = {4, 0, 0, 2, 3, 4, 1};
                                   return project(ops::gather_rows(a[0], rows), w);
                                 },
                                 {random_tensor({5, 3}, s(0))}};
               }});
  for (std::size_t k : {3, 5, 7}) {
    for (std::size_t d : {1, 2, 3}) {
      c.push_back({"depthwise_conv2d k" + std::to_string(k) + " d" + std::to_string(d),
                   [k, d](std::uint64_t seed) {
                     Seeds s{seed};
                     Tensor w = random_tensor({2, 8, 8}, s(2));
                     return Instance{[w, d](Args a) { return project(ops::depthwise_conv2d(a[0], a[1], d), w); },
                                     {random_tensor({2, 8, 8}, s(0)), random_tensor({2, k, k}, s(1))}};
                   }});
    }
  }
  for (std::size_t stride : {1, 2}) {
    c.push_back({"pointwise_conv stride " + std::to_string(stride), [stride](std::uint64_t seed) {
                   Seeds s{seed};
                   const std::size_t o = (5 + stride - 1) / stride;
                   Tensor w = random_tensor({4, o, o}, s(3));
                   return Instance{[w, stride](Args a) {
                                     return project(ops::add_channel_bias(ops::pointwise_conv(a[0], a[1], stride), a[2]), w);
                                   },
                                   {random_tensor({3, 5, 5}, s(0)), random_tensor({4, 3}, s(1)),
                                    random_tensor({4}, s(2))}};
                 }});
  }
  c.push_back({"layer_norm", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({4, 3, 3}, s(3));
                 return Instance{[w](Args a) { return project(ops::layer_norm(a[0], a[1], a[2]), w); },
                                 {random_tensor({4, 3, 3}, s(0)), random_tensor({4}, s(1), 0.5, 1.5),
                                  random_tensor({4}, s(2))}};
               }});
  c.push_back({"upsample_nearest", [](std::uint64_t seed) {
                 Seeds s{seed};
                 Tensor w = random_tensor({2, 6, 6}, s(1));
                 return Instance{[w](Args a) { return project(ops::upsample_nearest(a[0], 2), w); },
                                 {random_tensor({2, 3, 3}, s(0))}};
               }});

  for (graph::Aggregation v : {graph::Aggregation::kResEdgeConv, graph::Aggregation::kGraphSage,
                               graph::Aggregation::kGin, graph::Aggregation::kMaxRelative}) {
    c.push_back({"aggregate " + std::string(graph::aggregation_name(v)), [v](std::uint64_t seed) {
                   const graph::GraphBlockConfig cfg = small_block(v);
                   const BlockInputs b = block_inputs(cfg, derive_seed(seed, 1));
                   Tensor w = random_tensor({16, cfg.dim()}, derive_seed(seed, 2));
                   Instance inst{[cfg, b, w](Args a) {
                                   const graph::GraphBlockWeights gw = rebind(b, cfg, a, 1);
                                   const graph::PatchFeatures p = graph::patchify(a[0], cfg.patch);
                                   graph::Graph g = graph::build_graph(p, cfg.k);
                                   graph::select_neighbors(p, g, graph::negative_vertex(p), cfg.k_s);
                                   return project(graph::aggregate(p, g, cfg.variant, gw.agg), w);
                                 },
                                 {random_tensor({4, 8, 8}, derive_seed(seed, 0))}, 24};
                   append_params(inst.inputs, b);
                   return inst;
                 }});
  }
  c.push_back({"multi_order_update", [](std::uint64_t seed) {
                 const graph::GraphBlockConfig cfg = small_block(graph::Aggregation::kResEdgeConv);
                 const BlockInputs b = block_inputs(cfg, derive_seed(seed, 1));
                 Tensor w = random_tensor({cfg.dim(), 4, 4}, derive_seed(seed, 2));
                 Instance inst{[cfg, b, w](Args a) {
                                 const graph::GraphBlockWeights gw = rebind(b, cfg, a, 1);
                                 return project(graph::multi_order_update(a[0], gw.update, cfg.split()), w);
                               },
                               {random_tensor({cfg.dim(), 4, 4}, derive_seed(seed, 0))}, 24};
                 append_params(inst.inputs, b);
                 return inst;
               }});
  c.push_back({"gate_fuse", [](std::uint64_t seed) {
                 const graph::GraphBlockConfig cfg = small_block(graph::Aggregation::kResEdgeConv);
                 const BlockInputs b = block_inputs(cfg, derive_seed(seed, 1));
                 Tensor w = random_tensor({cfg.dim(), 4, 4}, derive_seed(seed, 2));
                 Instance inst{[cfg, b, w](Args a) {
                                 const graph::GraphBlockWeights gw = rebind(b, cfg, a, 2);
                                 return project(graph::gate_fuse(a[0], a[1], gw.gate), w);
                               },
                               {random_tensor({cfg.dim(), 4, 4}, derive_seed(seed, 0)),
                                random_tensor({cfg.dim(), 4, 4}, derive_seed(seed, 3))}, 24};
                 append_params(inst.inputs, b);
                 return inst;
               }});
  c.push_back({"channel_fusion", [](std::uint64_t seed) {
                 const graph::GraphBlockConfig cfg = small_block(graph::Aggregation::kResEdgeConv);
                 const BlockInputs b = block_inputs(cfg, derive_seed(seed, 1));
                 Tensor w = random_tensor({4, 8, 8}, derive_seed(seed, 2));
                 Instance inst{[cfg, b, w](Args a) {
                                 const graph::GraphBlockWeights gw = rebind(b, cfg, a, 1);
                                 return project(graph::channel_fusion(a[0], gw.fusion), w);
                               },
                               {random_tensor({4, 8, 8}, derive_seed(seed, 0))}, 24};
                 append_params(inst.inputs, b);
                 return inst;
               }});

  // graph aggregate -> update -> gate -> channel fusion -> output head -> albedo loss
  for (graph::Aggregation v : {graph::Aggregation::kResEdgeConv, graph::Aggregation::kGraphSage,
                               graph::Aggregation::kGin, graph::Aggregation::kMaxRelative}) {
    c.push_back({"block+head " + std::string(graph::aggregation_name(v)), [v](std::uint64_t seed) {
                   const graph::GraphBlockConfig cfg = small_block(v);
                   const BlockInputs b = block_inputs(cfg, derive_seed(seed, 1));
                   const std::size_t nz = 6;
                   Tensor target = random_tensor({8, 8}, derive_seed(seed, 2), 0.0, 1.0);
                   Instance inst{[cfg, b, target](Args a) {
                                   const graph::GraphBlockWeights gw = rebind(b, cfg, a, 3);
                                   const DiffTensor y = graph::graph_block(a[0], gw, cfg);
                                   const DiffTensor v = ops::softplus(
                                       ops::add_channel_bias(ops::pointwise_conv(y, a[1]), a[2]));
                                   const DiffTensor diff = ops::sub(network::albedo_project(v), DiffTensor(target));
                                   return ops::scale(ops::sum(ops::square(diff)), 1.0 / 64.0);
                                 },
                                 {random_tensor({4, 8, 8}, derive_seed(seed, 0)),
                                  random_tensor({nz, 4}, derive_seed(seed, 3)),
                                  random_tensor({nz}, derive_seed(seed, 4))},
                                 16};
                   append_params(inst.inputs, b);
                   return inst;
                 }});
  }

  c.push_back({"multiscale losses", [](std::uint64_t seed) {
                 Seeds s{seed};
                 training::TrainSample sample;
                 for (std::size_t i = 0; i < network::kScales; ++i) {
                   const std::size_t e = 8 >> i;
                   sample.albedo[i] = random_tensor({e, e}, s(10 + i), 0.0, 1.0);
                   sample.depth[i] = random_tensor({e, e}, s(20 + i), 0.0, 0.15);
                 }
                 return Instance{[sample](Args a) {
                                   network::BranchOutputs out{a[0], a[1], a[2]};
                                   const DiffTensor la = training::albedo_loss(out, sample, training::LossType::kMse, 3);
                                   const DiffTensor ld = training::depth_loss(out, sample, training::LossType::kMse, 3, 10.0);
                                   return ops::add(la, ops::scale(ld, 10.0));
                                 },
                                 {tie_free({6, 8, 8}, s(0)), tie_free({6, 4, 4}, s(1)),
                                  tie_free({6, 2, 2}, s(2))}};
               }});

  c.push_back({"branch_forward", [](std::uint64_t seed) {
                 network::NetworkConfig net;
                 net.depth_bins = 4;
                 net.base_channels = 2;
                 const ParamSet params = network::init_branch(net, derive_seed(seed, 1));
                 std::vector<std::string> names;
                 for (std::size_t i = 0; i < params.size(); ++i) names.push_back(params.name(i));
                 Tensor w = random_tensor({4, 16, 16}, derive_seed(seed, 2));
                 Instance inst{[net, params, names, w](Args a) {
                                 Binder bind(params, nullptr);
                                 for (std::size_t i = 0; i < names.size(); ++i) bind.provide(names[i], a[i + 1]);
                                 return project(network::branch_forward(a[0], bind, net)[0], w);
                               },
                               {random_tensor({4, 16, 16}, derive_seed(seed, 0), 0.0, 1.0)}, 4};
                 for (std::size_t i = 0; i < params.size(); ++i) inst.inputs.push_back(params.value(i));
                 return inst;
               }});
  return c;
}

}  // namespace

std::vector<SuiteEntry> gradient_suite(std::size_t instances, std::uint64_t seed,
                                       double tolerance) {
  std::vector<SuiteEntry> out;
  const std::vector<Case> all = cases();
  for (std::size_t ci = 0; ci < all.size(); ++ci) {
    SuiteEntry e{all[ci].name, instances, 0.0, true};
    for (std::size_t i = 0; i < instances; ++i) {
      const std::uint64_t s = derive_seed(derive_seed(seed, ci), i);
      const Instance inst = all[ci].build(s);
      GradCheckOptions opt;
      opt.max_entries = inst.max_entries;
      opt.seed = s;
      e.max_error = std::max(e.max_error, gradcheck(inst.fn, inst.inputs, opt).max_error);
    }
    e.passed = e.max_error < tolerance;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace nlos::verify
