#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "nlos/common/rng.hpp"
#include "nlos/graph/block.hpp"
#include "nlos/physics/geometry.hpp"
#include "nlos/physics/transport.hpp"
#include "nlos/tensor/params.hpp"

// Voxels inside the network are z-major: [n_z x H x W], so depth plays the
// role of channels. to_volume_layout / from_volume_layout convert to the
// physics layout [n_x x n_y x n_z].

namespace nlos::network {

inline constexpr std::size_t kScales = 3;

/// Feature grid F (or the depth-masked F') at one scale.
struct GridFeature {
  DiffTensor values;  // [C x H x W]
  std::size_t scale = 1;
};

enum class BranchKind { kAlbedo, kDepth };
std::string_view branch_name(BranchKind b) noexcept;

struct NetworkConfig {
  std::size_t depth_bins = 32;    // n_z, input and output channels
  std::size_t base_channels = 16; // C_1, doubled at every coarser scale
  graph::GraphBlockConfig block;  // `channels` is overridden per scale

  std::size_t channels(std::size_t scale) const noexcept {
    return base_channels << (scale - 1);
  }
  graph::GraphBlockConfig block_at(std::size_t scale) const;
  /// Throws ParameterError on zero widths.
  void validate() const;
};

/// Adjoint backprojection, max-normalised, as [n_z x n_x x n_y].
GridFeature feature_transform(const physics::TransientMeasurement& y,
                              const physics::TransportOperator& op);
GridFeature feature_transform(const physics::TransientMeasurement& y);

/// Keeps, per pixel, only the channel holding the maximum (lowest index on
/// ties); all other channels become 0.
Tensor depth_mask(const Tensor& f);

/// Parameters of one branch. Both branches use the same names and shapes.
/// Output head biases start at softplus^-1(0.05), everything else uniform
/// in +-1/sqrt(fan_in) (update kernels add a centred delta).
ParamSet init_branch(const NetworkConfig& cfg, std::uint64_t seed);

/// Throws DimensionError if `params` does not have the layout init_branch
/// produces for `cfg`.
void check_branch(const ParamSet& params, const NetworkConfig& cfg);

/// Outputs of one branch, index 0 = scale 1 (full resolution).
using BranchOutputs = std::array<DiffTensor, kScales>;

/// Three-scale encoder/decoder. Input [n_z x H x W] with H, W divisible by 8.
/// Output s has extents [n_z x H/2^(s-1) x W/2^(s-1)] and is strictly positive.
BranchOutputs branch_forward(const DiffTensor& input, Binder& bind, const NetworkConfig& cfg);

/// Per-pixel maximum over z: [n_z x H x W] -> [H x W].
DiffTensor albedo_project(const DiffTensor& voxel);
/// Per-pixel argmax over z times z_res (lowest index on ties).
Tensor depth_project(const Tensor& voxel, double z_res);
/// Differentiable depth: sum_z softmax_z(beta * v) * z * z_res.
DiffTensor soft_depth_project(const DiffTensor& voxel, double z_res, double beta);

/// Zero voxel except at z* = argmax_z depth_v, which takes max_z albedo_v.
Tensor render_combine(const Tensor& albedo_v, const Tensor& depth_v);

Tensor to_volume_layout(const Tensor& voxel);    // [n_z,H,W] -> [H,W,n_z]
Tensor from_volume_layout(const Tensor& volume); // [H,W,n_z] -> [n_z,H,W]

/// 2x2 average pooling of an [H x W] image.
Tensor avg_pool2(const Tensor& image);

}  // namespace nlos::network
