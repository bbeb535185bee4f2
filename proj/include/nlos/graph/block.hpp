#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlos/common/rng.hpp"
#include "nlos/graph/graph.hpp"
#include "nlos/tensor/params.hpp"

namespace nlos::graph {

enum class Aggregation { kResEdgeConv, kGraphSage, kGin, kMaxRelative };

std::string_view aggregation_name(Aggregation a) noexcept;
/// Accepts "resedgeconv", "graphsage", "gin", "maxrelative" (case-insensitive,
/// '-' and '_' ignored).
Aggregation parse_aggregation(std::string_view text);

/// Channel counts (D_l, D_m, D_h) of the multi-order update.
struct ChannelSplit {
  std::size_t low = 0, mid = 0, high = 0;
  std::size_t total() const noexcept { return low + mid + high; }
};

/// Split of D by integer ratio; low and mid are rounded, high takes the rest.
ChannelSplit split_channels(std::size_t d, const std::array<std::size_t, 3>& ratio);

struct GraphBlockConfig {
  std::size_t channels = 16;  // C of the grid feature
  std::size_t patch = 2;
  std::size_t k = 9;
  std::size_t k_s = 6;
  Aggregation variant = Aggregation::kResEdgeConv;
  std::array<std::size_t, 3> split_ratio{1, 1, 2};
  std::size_t expand_ratio = 2;

  std::size_t dim() const noexcept { return channels * patch * patch; }
  ChannelSplit split() const { return split_channels(dim(), split_ratio); }
};

// --- weights ---------------------------------------------------------------

/// Linear maps act on row vectors: [rows x in] * [in x out].
/// `inner` holds the variant's own maps:
///   ResEdgeConv  {W_edge [2D x D]}
///   GraphSAGE    {W_neigh [D x D], W_self [2D x D]}
///   GIN          {W_gin [D x D]}
///   MaxRelative  {W_mr [2D x D]}
struct AggregationWeights {
  DiffTensor w_in;   // [D x D]
  DiffTensor w_out;  // [D x D]
  std::vector<DiffTensor> inner;
};

struct UpdateWeights {
  DiffTensor dw_low;   // [D x 5 x 5], dilation 1
  DiffTensor dw_mid;   // [D_m x 5 x 5], dilation 2
  DiffTensor dw_high;  // [D_h x 7 x 7], dilation 3
};

struct GateWeights {
  DiffTensor w_agg;     // 1x1 [D x D] on the aggregated features
  DiffTensor w_update;  // 1x1 [D x D] on the multi-order output
};

struct FusionWeights {
  DiffTensor norm_gain, norm_bias;  // [C]
  DiffTensor w_expand, b_expand;    // [rC x C], [rC]
  DiffTensor dw;                    // [rC x 3 x 3]
  DiffTensor w_project, b_project;  // [C x rC], [C]
};

struct GraphBlockWeights {
  AggregationWeights agg;
  UpdateWeights update;
  GateWeights gate;
  FusionWeights fusion;
};

/// Adds every parameter of one block under `prefix` with the default
/// initialisation: uniform(+-1/sqrt(fan_in)); update kernels get a centred
/// delta on top; norm gain 1 and bias 0.
void init_graph_block(ParamSet& params, const std::string& prefix, const GraphBlockConfig& cfg,
                      Rng& rng);
GraphBlockWeights bind_graph_block(Binder& bind, const std::string& prefix,
                                   const GraphBlockConfig& cfg);

// --- operations --------------------------------------------------------------

/// X'' = GraphConv(X W_in) W_out + X, where GraphConv reduces the messages
/// [h_i, h_j - h_i] over the selected neighbours j of each vertex.
DiffTensor aggregate(const PatchFeatures& p, const Graph& g, Aggregation variant,
                     const AggregationWeights& w);

/// Dilated depth-wise update on a [D x gh x gw] grid: DW5(d=1) on all
/// channels, then identity / DW5(d=2) / DW7(d=3) on the low / mid / high
/// channel groups, concatenated back.
DiffTensor multi_order_update(const DiffTensor& grid, const UpdateWeights& w, ChannelSplit split);

/// SiLU(Conv1x1(agg)) * SiLU(Conv1x1(x_d)).
DiffTensor gate_fuse(const DiffTensor& agg_grid, const DiffTensor& x_d, const GateWeights& w);

/// Z' = GELU(DW3(Conv1x1(Norm(Y)))), Z = GELU(Conv1x1(Z')) + Y on [C x H x W].
DiffTensor channel_fusion(const DiffTensor& y, const FusionWeights& w);

/// Intermediate state of one block, for inspection in tests and tools.
struct BlockTrace {
  Graph graph;
  DiffTensor aggregated;  // X'' [N x D]
  DiffTensor updated;     // X_D [D x gh x gw]
  DiffTensor gated;       // Y   [D x gh x gw]
};

/// Full unit [C x H x W] -> [C x H x W]:
///   patchify -> dynamic k-NN -> selection -> aggregate -> update -> gate,
///   back to the pixel grid with a skip from the input, then channel fusion.
/// k and k_s are clamped to N - 1 on grids with too few vertices.
DiffTensor graph_block(const DiffTensor& feature, const GraphBlockWeights& w,
                       const GraphBlockConfig& cfg, BlockTrace* trace = nullptr);

}  // namespace nlos::graph
