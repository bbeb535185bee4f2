#include "nlos/network/network.hpp"

#include <cmath>

#include "nlos/common/error.hpp"
#include "nlos/tensor/ops.hpp"

namespace nlos::network {

std::string_view branch_name(BranchKind b) noexcept {
  return b == BranchKind::kAlbedo ? "albedo" : "depth";
}

graph::GraphBlockConfig NetworkConfig::block_at(std::size_t scale) const {
  graph::GraphBlockConfig c = block;
  c.channels = channels(scale);
  return c;
}

void NetworkConfig::validate() const {
  if (depth_bins == 0 || base_channels == 0) {
    throw ParameterError("network widths must be positive");
  }
  if (block.patch == 0 || block.k == 0 || block.k_s == 0 || block.k_s > block.k) {
    throw ParameterError("graph block needs patch >= 1 and 1 <= k_s <= k");
  }
  if (block.expand_ratio == 0) throw ParameterError("expand ratio must be positive");
  for (std::size_t s = 1; s <= kScales; ++s) (void)block_at(s).split();
}

// --- feature transform -------------------------------------------------------

GridFeature feature_transform(const physics::TransientMeasurement& y,
                              const physics::TransportOperator& op) {
  const physics::SamplingGeometry& g = op.geometry();
  if (!(y.geometry == g)) throw DimensionError("feature_transform: geometry mismatch");
  const Tensor back = op.adjoint(y);
  Tensor f = from_volume_layout(back);
  const double peak = f.max();
  if (peak > 0.0) {
    for (double& v : f.data()) v /= peak;
  }
  return GridFeature{DiffTensor(std::move(f)), 1};
}

GridFeature feature_transform(const physics::TransientMeasurement& y) {
  return feature_transform(y, physics::TransportOperator(y.geometry));
}

namespace {

void require_voxel(const Tensor& v, const char* what) {
  if (v.rank() != 3) {
    throw DimensionError(std::string(what) + ": expected [n_z x H x W], got " +
                         shape_string(v.shape()));
  }
}

// argmax over axis 0 of a [Z x H x W] tensor, lowest index on ties.
std::vector<std::size_t> argmax_z(const Tensor& v) {
  const std::size_t nz = v.dim(0), plane = v.dim(1) * v.dim(2);
  std::vector<std::size_t> best(plane, 0);
  for (std::size_t z = 1; z < nz; ++z) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (v[z * plane + p] > v[best[p] * plane + p]) best[p] = z;
    }
  }
  return best;
}

}  // namespace

Tensor depth_mask(const Tensor& f) {
  require_voxel(f, "depth_mask");
  const std::size_t plane = f.dim(1) * f.dim(2);
  const std::vector<std::size_t> best = argmax_z(f);
  Tensor out(f.shape());
  for (std::size_t p = 0; p < plane; ++p) out[best[p] * plane + p] = f[best[p] * plane + p];
  return out;
}

// --- parameters --------------------------------------------------------------

namespace {

// Heads start at softplus(b) = 0.05: most of a scene is empty.
const double kHeadBias = std::log(std::expm1(0.05));

std::string enc(std::size_t s) { return "enc" + std::to_string(s) + "."; }
std::string dec(std::size_t s) { return "dec" + std::to_string(s) + "."; }

void add_linear(ParamSet& p, const std::string& name, std::size_t out, std::size_t in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w({out, in});
  for (double& v : w.data()) v = uniform(rng, -bound, bound);
  Tensor b({out});
  for (double& v : b.data()) v = uniform(rng, -bound, bound);
  p.add(name + ".w", std::move(w));
  p.add(name + ".b", std::move(b));
}

DiffTensor linear(const DiffTensor& x, Binder& bind, const std::string& name,
                  std::size_t stride = 1) {
  return ops::add_channel_bias(ops::pointwise_conv(x, bind(name + ".w"), stride),
                               bind(name + ".b"));
}

DiffTensor head(const DiffTensor& x, Binder& bind, std::size_t scale) {
  return ops::softplus(linear(x, bind, "head" + std::to_string(scale)));
}

DiffTensor block(const DiffTensor& x, Binder& bind, const std::string& prefix,
                 const graph::GraphBlockConfig& cfg) {
  return graph::graph_block(x, graph::bind_graph_block(bind, prefix, cfg), cfg);
}

}  // namespace

ParamSet init_branch(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamSet p;
  add_linear(p, "stem", cfg.channels(1), cfg.depth_bins, rng);
  for (std::size_t s = 1; s <= kScales; ++s) {
    graph::init_graph_block(p, enc(s), cfg.block_at(s), rng);
    if (s < kScales) add_linear(p, "down" + std::to_string(s), cfg.channels(s + 1), cfg.channels(s), rng);
  }
  for (std::size_t s = kScales; s >= 1; --s) {
    if (s < kScales) add_linear(p, "up" + std::to_string(s), cfg.channels(s), cfg.channels(s + 1), rng);
    graph::init_graph_block(p, dec(s), cfg.block_at(s), rng);
    add_linear(p, "head" + std::to_string(s), cfg.depth_bins, cfg.channels(s), rng);
    p.set("head" + std::to_string(s) + ".b", Tensor({cfg.depth_bins}, kHeadBias));
  }
  return p;
}

void check_branch(const ParamSet& params, const NetworkConfig& cfg) {
  const ParamSet ref = init_branch(cfg, 0);
  if (params.size() != ref.size()) {
    throw DimensionError("branch parameters: expected " + std::to_string(ref.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const std::string& n = ref.name(i);
    if (!params.contains(n)) throw DimensionError("branch parameters: missing " + n);
    if (params.get(n).shape() != ref.value(i).shape()) {
      throw DimensionError("branch parameter " + n + ": expected " +
                           shape_string(ref.value(i).shape()) + ", got " +
                           shape_string(params.get(n).shape()));
    }
  }
}

BranchOutputs branch_forward(const DiffTensor& input, Binder& bind, const NetworkConfig& cfg) {
  const Shape& s = input.shape();
  const std::size_t align = cfg.block.patch << (kScales - 1);
  if (s.size() != 3 || s[0] != cfg.depth_bins || s[1] % align != 0 || s[2] % align != 0) {
    throw DimensionError("branch_forward: input " + shape_string(s) + " needs " +
                         std::to_string(cfg.depth_bins) + " channels and H, W divisible by " +
                         std::to_string(align));
  }

  std::array<DiffTensor, kScales> skip;
  DiffTensor x = linear(input, bind, "stem");
  for (std::size_t sc = 1; sc <= kScales; ++sc) {
    skip[sc - 1] = block(x, bind, enc(sc), cfg.block_at(sc));
    if (sc < kScales) x = linear(skip[sc - 1], bind, "down" + std::to_string(sc), 2);
  }

  BranchOutputs out;
  x = skip[kScales - 1];
  for (std::size_t sc = kScales; sc >= 1; --sc) {
    if (sc < kScales) {
      const DiffTensor up = linear(ops::upsample_nearest(x, 2), bind, "up" + std::to_string(sc));
      x = ops::add(up, skip[sc - 1]);
    }
    x = block(x, bind, dec(sc), cfg.block_at(sc));
    out[sc - 1] = head(x, bind, sc);
  }
  return out;
}

// --- projections -------------------------------------------------------------

DiffTensor albedo_project(const DiffTensor& voxel) {
  require_voxel(voxel.value(), "albedo_project");
  return ops::reduce_max_arg(voxel, 0).values;
}

Tensor depth_project(const Tensor& voxel, double z_res) {
  require_voxel(voxel, "depth_project");
  const std::vector<std::size_t> best = argmax_z(voxel);
  Tensor out({voxel.dim(1), voxel.dim(2)});
  for (std::size_t p = 0; p < best.size(); ++p) out[p] = static_cast<double>(best[p]) * z_res;
  return out;
}

DiffTensor soft_depth_project(const DiffTensor& voxel, double z_res, double beta) {
  require_voxel(voxel.value(), "soft_depth_project");
  if (!(beta > 0.0)) throw ParameterError("soft_depth_project: temperature must be positive");
  const std::size_t nz = voxel.dim(0), h = voxel.dim(1), w = voxel.dim(2);
  const DiffTensor weights = ops::softmax(ops::scale(voxel, beta), 0);
  Tensor ramp({1, nz});
  for (std::size_t z = 0; z < nz; ++z) ramp[z] = static_cast<double>(z) * z_res;
  const DiffTensor depth =
      ops::matmul(DiffTensor(std::move(ramp)), ops::reshape(weights, {nz, h * w}));
  return ops::reshape(depth, {h, w});
}

Tensor render_combine(const Tensor& albedo_v, const Tensor& depth_v) {
  require_voxel(albedo_v, "render_combine");
  if (albedo_v.shape() != depth_v.shape()) {
    throw DimensionError("render_combine: " + shape_string(albedo_v.shape()) + " vs " +
                         shape_string(depth_v.shape()));
  }
  const std::size_t plane = albedo_v.dim(1) * albedo_v.dim(2);
  const std::vector<std::size_t> a = argmax_z(albedo_v);
  const std::vector<std::size_t> d = argmax_z(depth_v);
  Tensor out(albedo_v.shape());
  for (std::size_t p = 0; p < plane; ++p) out[d[p] * plane + p] = albedo_v[a[p] * plane + p];
  return out;
}

Tensor to_volume_layout(const Tensor& voxel) {
  require_voxel(voxel, "to_volume_layout");
  const std::size_t nz = voxel.dim(0), h = voxel.dim(1), w = voxel.dim(2);
  Tensor out({h, w, nz});
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) out.at(i, j, z) = voxel.at(z, i, j);
  return out;
}

Tensor from_volume_layout(const Tensor& volume) {
  if (volume.rank() != 3) throw DimensionError("from_volume_layout: expected rank 3");
  const std::size_t h = volume.dim(0), w = volume.dim(1), nz = volume.dim(2);
  Tensor out({nz, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t z = 0; z < nz; ++z) out.at(z, i, j) = volume.at(i, j, z);
  return out;
}

Tensor avg_pool2(const Tensor& image) {
  if (image.rank() != 2 || image.dim(0) % 2 != 0 || image.dim(1) % 2 != 0) {
    throw DimensionError("avg_pool2: need an [H x W] image with even extents, got " +
                         shape_string(image.shape()));
  }
  const std::size_t h = image.dim(0) / 2, w = image.dim(1) / 2;
  Tensor out({h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.at(i, j) = 0.25 * (image.at(2 * i, 2 * j) + image.at(2 * i, 2 * j + 1) +
                             image.at(2 * i + 1, 2 * j) + image.at(2 * i + 1, 2 * j + 1));
  return out;
}

}  // namespace nlos::network
