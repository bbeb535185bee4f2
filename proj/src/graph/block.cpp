#include "nlos/graph/block.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "nlos/common/error.hpp"
#include "nlos/tensor/ops.hpp"

namespace nlos::graph {

std::string_view aggregation_name(Aggregation a) noexcept {
  switch (a) {
    case Aggregation::kResEdgeConv:
      return "resedgeconv";
    case Aggregation::kGraphSage:
      return "graphsage";
    case Aggregation::kGin:
      return "gin";
    case Aggregation::kMaxRelative:
      return "maxrelative";
  }
  return "unknown";
}

Aggregation parse_aggregation(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (Aggregation a : {Aggregation::kResEdgeConv, Aggregation::kGraphSage, Aggregation::kGin,
                        Aggregation::kMaxRelative}) {
    if (key == aggregation_name(a)) return a;
  }
  throw ParameterError("unknown aggregation variant: " + std::string(text));
}

ChannelSplit split_channels(std::size_t d, const std::array<std::size_t, 3>& ratio) {
  const std::size_t sum = ratio[0] + ratio[1] + ratio[2];
  if (sum == 0) throw ParameterError("channel split ratio must not be all zero");
  auto part = [&](std::size_t r) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(d) * static_cast<double>(r) / static_cast<double>(sum)));
  };
  ChannelSplit s{part(ratio[0]), part(ratio[1]), 0};
  if (s.low + s.mid >= d || s.low == 0 || s.mid == 0) {
    throw ParameterError("channel split of D = " + std::to_string(d) +
                         " leaves an empty group");
  }
  s.high = d - s.low - s.mid;
  return s;
}

// --- parameters --------------------------------------------------------------

namespace {

Tensor uniform_tensor(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, -bound, bound);
  return t;
}

Tensor delta_kernel(std::size_t channels, std::size_t k, Rng& rng) {
  Tensor t = uniform_tensor({channels, k, k}, k * k, rng);
  for (std::size_t c = 0; c < channels; ++c) t.at(c, k / 2, k / 2) += 1.0;
  return t;
}

std::vector<std::string> inner_names(Aggregation a) {
  switch (a) {
    case Aggregation::kResEdgeConv:
      return {"agg.w_edge"};
    case Aggregation::kGraphSage:
      return {"agg.w_neigh", "agg.w_self"};
    case Aggregation::kGin:
      return {"agg.w_gin"};
    case Aggregation::kMaxRelative:
      return {"agg.w_mr"};
  }
  return {};
}

std::vector<Shape> inner_shapes(Aggregation a, std::size_t d) {
  switch (a) {
    case Aggregation::kResEdgeConv:
      return {{2 * d, d}};
    case Aggregation::kGraphSage:
      return {{d, d}, {2 * d, d}};
    case Aggregation::kGin:
      return {{d, d}};
    case Aggregation::kMaxRelative:
      return {{2 * d, d}};
  }
  return {};
}

}  // namespace

void init_graph_block(ParamSet& params, const std::string& prefix, const GraphBlockConfig& cfg,
                      Rng& rng) {
  const std::size_t d = cfg.dim(), c = cfg.channels, hidden = cfg.expand_ratio * c;
  const ChannelSplit s = cfg.split();
  params.add(prefix + "w_in", uniform_tensor({d, d}, d, rng));
  const auto names = inner_names(cfg.variant);
  const auto shapes = inner_shapes(cfg.variant, d);
  for (std::size_t i = 0; i < names.size(); ++i) {
    params.add(prefix + names[i], uniform_tensor(shapes[i], shapes[i][0], rng));
  }
  params.add(prefix + "w_out", uniform_tensor({d, d}, d, rng));
  params.add(prefix + "update.dw_low", delta_kernel(d, 5, rng));
  params.add(prefix + "update.dw_mid", delta_kernel(s.mid, 5, rng));
  params.add(prefix + "update.dw_high", delta_kernel(s.high, 7, rng));
  params.add(prefix + "gate.w_agg", uniform_tensor({d, d}, d, rng));
  params.add(prefix + "gate.w_update", uniform_tensor({d, d}, d, rng));
  params.add(prefix + "fusion.norm_gain", Tensor::ones({c}));
  params.add(prefix + "fusion.norm_bias", Tensor::zeros({c}));
  params.add(prefix + "fusion.w_expand", uniform_tensor({hidden, c}, c, rng));
  params.add(prefix + "fusion.b_expand", uniform_tensor({hidden}, c, rng));
  params.add(prefix + "fusion.dw", uniform_tensor({hidden, 3, 3}, 9, rng));
  params.add(prefix + "fusion.w_project", uniform_tensor({c, hidden}, hidden, rng));
  params.add(prefix + "fusion.b_project", uniform_tensor({c}, hidden, rng));
}

GraphBlockWeights bind_graph_block(Binder& bind, const std::string& prefix,
                                   const GraphBlockConfig& cfg) {
  GraphBlockWeights w;
  w.agg.w_in = bind(prefix + "w_in");
  w.agg.w_out = bind(prefix + "w_out");
  for (const std::string& n : inner_names(cfg.variant)) w.agg.inner.push_back(bind(prefix + n));
  w.update.dw_low = bind(prefix + "update.dw_low");
  w.update.dw_mid = bind(prefix + "update.dw_mid");
  w.update.dw_high = bind(prefix + "update.dw_high");
  w.gate.w_agg = bind(prefix + "gate.w_agg");
  w.gate.w_update = bind(prefix + "gate.w_update");
  w.fusion.norm_gain = bind(prefix + "fusion.norm_gain");
  w.fusion.norm_bias = bind(prefix + "fusion.norm_bias");
  w.fusion.w_expand = bind(prefix + "fusion.w_expand");
  w.fusion.b_expand = bind(prefix + "fusion.b_expand");
  w.fusion.dw = bind(prefix + "fusion.dw");
  w.fusion.w_project = bind(prefix + "fusion.w_project");
  w.fusion.b_project = bind(prefix + "fusion.b_project");
  return w;
}

// --- operations --------------------------------------------------------------

namespace {

void check_matrix(const DiffTensor& w, std::size_t rows, std::size_t cols, const char* what) {
  if (w.shape() != Shape{rows, cols}) {
    throw DimensionError(std::string(what) + ": expected " + shape_string({rows, cols}) +
                         ", got " + shape_string(w.shape()));
  }
}

// [N*k_s x D] -> [N x D] by max / sum over each vertex's k_s rows.
DiffTensor reduce_groups_max(const DiffTensor& rows, std::size_t n, std::size_t ks) {
  const std::size_t d = rows.dim(1);
  return ops::reduce_max_arg(ops::reshape(rows, {n, ks, d}), 1).values;
}

DiffTensor reduce_groups_sum(const DiffTensor& rows, std::size_t n, std::size_t ks) {
  const std::size_t d = rows.dim(1);
  return ops::reduce_sum(ops::reshape(rows, {n, ks, d}), 1);
}

DiffTensor concat_columns(const DiffTensor& a, const DiffTensor& b) {
  const DiffTensor parts[] = {a, b};
  return ops::concat(parts, 1);
}

}  // namespace

DiffTensor aggregate(const PatchFeatures& p, const Graph& g, Aggregation variant,
                     const AggregationWeights& w) {
  const std::size_t n = p.num_vertices(), d = p.dim(), ks = g.k_s;
  if (ks < 1) throw ParameterError("aggregate: every vertex needs at least one neighbour");
  if (g.num_vertices != n || g.selected.size() != n * ks) {
    throw DimensionError("aggregate: graph does not match the patch features");
  }
  check_matrix(w.w_in, d, d, "aggregate W_in");
  check_matrix(w.w_out, d, d, "aggregate W_out");
  const auto shapes = inner_shapes(variant, d);
  if (w.inner.size() != shapes.size()) {
    throw DimensionError("aggregate: wrong number of weights for " +
                         std::string(aggregation_name(variant)));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    check_matrix(w.inner[i], shapes[i][0], shapes[i][1], "aggregate inner weight");
  }

  std::vector<std::size_t> centre(n * ks);
  for (std::size_t i = 0; i < n; ++i) std::fill_n(centre.begin() + i * ks, ks, i);

  const DiffTensor h = ops::matmul(p.x, w.w_in);
  const DiffTensor hn = ops::gather_rows(h, g.selected);
  DiffTensor conv;
  switch (variant) {
    case Aggregation::kResEdgeConv: {
      const DiffTensor hc = ops::gather_rows(h, centre);
      const DiffTensor msg = ops::matmul(concat_columns(hc, ops::sub(hn, hc)), w.inner[0]);
      conv = ops::add(reduce_groups_max(msg, n, ks), h);
      break;
    }
    case Aggregation::kGraphSage: {
      const DiffTensor proj = ops::matmul(hn, w.inner[0]);
      const DiffTensor mean = ops::scale(reduce_groups_sum(proj, n, ks), 1.0 / static_cast<double>(ks));
      conv = ops::matmul(concat_columns(h, mean), w.inner[1]);
      break;
    }
    case Aggregation::kGin: {
      // epsilon fixed to 0: (1 + 0) * h_i + sum_j h_j
      conv = ops::matmul(ops::add(h, reduce_groups_sum(hn, n, ks)), w.inner[0]);
      break;
    }
    case Aggregation::kMaxRelative: {
      const DiffTensor hc = ops::gather_rows(h, centre);
      const DiffTensor rel = reduce_groups_max(ops::sub(hn, hc), n, ks);
      conv = ops::matmul(concat_columns(h, rel), w.inner[0]);
      break;
    }
  }
  return ops::add(ops::matmul(conv, w.w_out), p.x);
}

DiffTensor multi_order_update(const DiffTensor& grid, const UpdateWeights& w, ChannelSplit split) {
  if (grid.shape().size() != 3) throw DimensionError("multi_order_update: grid must be [D x h x w]");
  if (split.total() != grid.dim(0)) {
    throw DimensionError("multi_order_update: D_l + D_m + D_h = " + std::to_string(split.total()) +
                         " but D = " + std::to_string(grid.dim(0)));
  }
  const DiffTensor low = ops::depthwise_conv2d(grid, w.dw_low, 1);
  const std::size_t extents[] = {split.low, split.mid, split.high};
  const std::vector<DiffTensor> parts = ops::channel_split(low, extents);
  const DiffTensor updated[] = {parts[0], ops::depthwise_conv2d(parts[1], w.dw_mid, 2),
                                ops::depthwise_conv2d(parts[2], w.dw_high, 3)};
  return ops::channel_concat(updated);
}

DiffTensor gate_fuse(const DiffTensor& agg_grid, const DiffTensor& x_d, const GateWeights& w) {
  if (agg_grid.shape() != x_d.shape()) {
    throw DimensionError("gate_fuse: aggregated grid " + shape_string(agg_grid.shape()) +
                         " vs update " + shape_string(x_d.shape()));
  }
  return ops::mul(ops::silu(ops::pointwise_conv(agg_grid, w.w_agg)),
                  ops::silu(ops::pointwise_conv(x_d, w.w_update)));
}

DiffTensor channel_fusion(const DiffTensor& y, const FusionWeights& w) {
  if (y.shape().size() != 3) throw DimensionError("channel_fusion: input must be [C x H x W]");
  const DiffTensor normed = ops::layer_norm(y, w.norm_gain, w.norm_bias, 1e-5);
  const DiffTensor expanded = ops::add_channel_bias(ops::pointwise_conv(normed, w.w_expand), w.b_expand);
  const DiffTensor mixed = ops::gelu(ops::depthwise_conv2d(expanded, w.dw, 1));
  const DiffTensor projected =
      ops::add_channel_bias(ops::pointwise_conv(mixed, w.w_project), w.b_project);
  return ops::add(ops::gelu(projected), y);
}

DiffTensor graph_block(const DiffTensor& feature, const GraphBlockWeights& w,
                       const GraphBlockConfig& cfg, BlockTrace* trace) {
  if (feature.shape().size() != 3 || feature.dim(0) != cfg.channels) {
    throw DimensionError("graph_block: expected [" + std::to_string(cfg.channels) +
                         " x H x W], got " + shape_string(feature.shape()));
  }
  const PatchFeatures p = patchify(feature, cfg.patch);
  const std::size_t n = p.num_vertices();
  if (n < 2) throw DimensionError("graph_block: need at least two patches");
  const std::size_t k = std::min(cfg.k, n - 1);
  const std::size_t ks = std::min(cfg.k_s, k);

  Graph g = build_graph(p, k);
  select_neighbors(p, g, negative_vertex(p), ks);

  const DiffTensor aggregated = aggregate(p, g, cfg.variant, w.agg);
  const DiffTensor agg_grid = vertices_to_grid(aggregated, p.grid_h, p.grid_w);
  const DiffTensor updated = multi_order_update(agg_grid, w.update, cfg.split());
  const DiffTensor gated = gate_fuse(agg_grid, updated, w.gate);
  const DiffTensor back = ops::add(unpatchify(gated, cfg.channels, cfg.patch), feature);
  DiffTensor out = channel_fusion(back, w.fusion);
  if (trace != nullptr) *trace = BlockTrace{std::move(g), aggregated, updated, gated};
  return out;
}

}  // namespace nlos::graph
