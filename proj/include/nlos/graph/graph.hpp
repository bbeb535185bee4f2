#pragma once

#include <cstddef>
#include <vector>

#include "nlos/tensor/tape.hpp"

namespace nlos::graph {

/// Grid feature [C x H x W] cut into non-overlapping patch x patch cells.
/// Row i of `x` is the cell at (i / grid_w, i % grid_w), flattened
/// channel-major: component c*patch^2 + dy*patch + dx.
struct PatchFeatures {
  DiffTensor x;  // [N x D]
  std::size_t grid_h = 0, grid_w = 0;
  std::size_t patch = 1;
  std::size_t channels = 0;

  std::size_t num_vertices() const noexcept { return grid_h * grid_w; }
  std::size_t dim() const noexcept { return channels * patch * patch; }
};

/// Neighbour lists are stored row-major: vertex i owns entries
/// [i*k, (i+1)*k) of `neighbors` and [i*k_s, (i+1)*k_s) of `selected`.
struct Graph {
  std::size_t num_vertices = 0;
  std::size_t k = 0;
  std::size_t k_s = 0;
  std::vector<std::size_t> neighbors;
  std::vector<std::size_t> selected;
  Tensor x_neg;  // [D]

  std::span<const std::size_t> neighbors_of(std::size_t i) const {
    return std::span<const std::size_t>(neighbors).subspan(i * k, k);
  }
  std::span<const std::size_t> selected_of(std::size_t i) const {
    return std::span<const std::size_t>(selected).subspan(i * k_s, k_s);
  }
};

/// Differentiable patch split. Throws DimensionError unless H and W are
/// divisible by `patch` and the patch grid is square.
PatchFeatures patchify(const DiffTensor& feature, std::size_t patch);
/// Inverse of patchify for a [D x grid_h x grid_w] patch-grid tensor.
DiffTensor unpatchify(const DiffTensor& grid, std::size_t channels, std::size_t patch);
/// [N x D] vertex rows -> [D x grid_h x grid_w].
DiffTensor vertices_to_grid(const DiffTensor& x, std::size_t grid_h, std::size_t grid_w);

/// k nearest vertices (Euclidean, excluding self) of every row of `x`, ties
/// to the lower index. Requires 1 <= k < N.
std::vector<std::size_t> knn(const Tensor& x, std::size_t k);

/// Patchify + k-NN on the current feature values. The neighbour lists are
/// recomputed on every call, which is what makes the graph dynamic.
Graph build_graph(const PatchFeatures& p, std::size_t k);

/// Mean of the eight least informative patches: the four grid corners and
/// their diagonal inward neighbours. Grids smaller than 3x3 use the four
/// corners only.
Tensor negative_vertex(const PatchFeatures& p);

/// Keeps, for every vertex, the k_s neighbours farthest from x_neg
/// (ties to the lower index), in decreasing distance order.
/// Stores x_neg and the selection in `g`.
void select_neighbors(const PatchFeatures& p, Graph& g, const Tensor& x_neg, std::size_t k_s);

}  // namespace nlos::graph
