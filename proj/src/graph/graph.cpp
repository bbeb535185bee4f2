#include "nlos/graph/graph.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>

#include "nlos/common/error.hpp"
#include "nlos/tensor/ops.hpp"

namespace nlos::graph {

PatchFeatures patchify(const DiffTensor& feature, std::size_t patch) {
  if (feature.shape().size() != 3) throw DimensionError("patchify: feature must be [C x H x W]");
  if (patch < 1) throw ParameterError("patchify: patch size must be >= 1");
  const std::size_t c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  if (h % patch != 0 || w % patch != 0) {
    throw DimensionError("patchify: " + shape_string(feature.shape()) +
                         " not divisible into patches of " + std::to_string(patch));
  }
  const std::size_t gh = h / patch, gw = w / patch;
  if (gh != gw) throw DimensionError("patchify: patch grid must be square");
  const std::array<std::size_t, 5> axes{1, 3, 0, 2, 4};  // -> [gh, gw, C, p, p]
  DiffTensor five = ops::reshape(feature, {c, gh, patch, gw, patch});
  DiffTensor rows = ops::reshape(ops::permute(five, axes), {gh * gw, c * patch * patch});
  return PatchFeatures{std::move(rows), gh, gw, patch, c};
}

DiffTensor unpatchify(const DiffTensor& grid, std::size_t channels, std::size_t patch) {
  if (grid.shape().size() != 3) throw DimensionError("unpatchify: grid must be [D x gh x gw]");
  const std::size_t d = grid.dim(0), gh = grid.dim(1), gw = grid.dim(2);
  if (d != channels * patch * patch) throw DimensionError("unpatchify: D != C * patch^2");
  const std::array<std::size_t, 5> axes{0, 3, 1, 4, 2};  // [C,p,p,gh,gw] -> [C,gh,p,gw,p]
  DiffTensor five = ops::reshape(grid, {channels, patch, patch, gh, gw});
  return ops::reshape(ops::permute(five, axes), {channels, gh * patch, gw * patch});
}

DiffTensor vertices_to_grid(const DiffTensor& x, std::size_t grid_h, std::size_t grid_w) {
  if (x.shape().size() != 2 || x.dim(0) != grid_h * grid_w) {
    throw DimensionError("vertices_to_grid: expected [N x D] with N = grid_h * grid_w");
  }
  const std::array<std::size_t, 2> t{1, 0};
  return ops::reshape(ops::permute(x, t), {x.dim(1), grid_h, grid_w});
}

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

}  // namespace

std::vector<std::size_t> knn(const Tensor& x, std::size_t k) {
  if (x.rank() != 2) throw DimensionError("knn: expected [N x D]");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (k < 1 || k >= n) {
    throw ParameterError("knn: need 1 <= k < N (k = " + std::to_string(k) +
                         ", N = " + std::to_string(n) + ")");
  }
  std::vector<std::size_t> out(n * k);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  const double* base = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back(squared_distance(base + i * d, base + j * d, d), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t m = 0; m < k; ++m) out[i * k + m] = cand[m].second;
  }
  return out;
}

Graph build_graph(const PatchFeatures& p, std::size_t k) {
  Graph g;
  g.num_vertices = p.num_vertices();
  g.k = k;
  g.neighbors = knn(p.x.value(), k);
  return g;
}

Tensor negative_vertex(const PatchFeatures& p) {
  const std::size_t h = p.grid_h, w = p.grid_w, d = p.dim();
  std::vector<std::pair<std::size_t, std::size_t>> cells{
      {0, 0}, {0, w - 1}, {h - 1, 0}, {h - 1, w - 1}};
  if (h >= 3 && w >= 3) {
    cells.insert(cells.end(), {{1, 1}, {1, w - 2}, {h - 2, 1}, {h - 2, w - 2}});
  }
  Tensor mean({d});
  const Tensor& x = p.x.value();
  for (const auto& [r, c] : cells) {
    const std::size_t row = r * w + c;
    for (std::size_t i = 0; i < d; ++i) mean[i] += x.at(row, i);
  }
  for (double& v : mean.data()) v /= static_cast<double>(cells.size());
  return mean;
}

void select_neighbors(const PatchFeatures& p, Graph& g, const Tensor& x_neg, std::size_t k_s) {
  if (k_s < 1 || k_s > g.k) {
    throw ParameterError("select_neighbors: need 1 <= k_s <= k (k_s = " + std::to_string(k_s) +
                         ", k = " + std::to_string(g.k) + ")");
  }
  if (x_neg.size() != p.dim()) throw DimensionError("select_neighbors: x_neg length != D");
  g.x_neg = x_neg;
  const Tensor& x = p.x.value();
  const std::size_t d = p.dim();
  g.k_s = k_s;
  g.selected.assign(g.num_vertices * k_s, 0);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < g.num_vertices; ++i) {
    cand.clear();
    for (std::size_t j : g.neighbors_of(i)) {
      cand.emplace_back(squared_distance(x.data().data() + j * d, g.x_neg.data().data(), d), j);
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t m = 0; m < k_s; ++m) g.selected[i * k_s + m] = cand[m].second;
  }
}

}  // namespace nlos::graph
