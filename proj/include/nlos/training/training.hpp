#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nlos/network/network.hpp"
#include "nlos/physics/geometry.hpp"

namespace nlos::training {

enum class LossType { kL1, kMse, kL1Mse };
enum class Strategy { kAlbedoFirst, kDepthFirst, kSingleBranch };

std::string_view loss_type_name(LossType t) noexcept;
std::string_view strategy_name(Strategy s) noexcept;
/// "l1", "mse", "l1+mse" (case-insensitive).
LossType parse_loss_type(std::string_view text);
/// "albedo-first", "depth-first", "single-branch" ('_' accepted for '-').
Strategy parse_strategy(std::string_view text);

struct TrainConfig {
  double lr_init = 8e-4;
  double lr_final = 1e-6;
  std::size_t stage1_epochs = 150;
  std::size_t stage2_epochs = 80;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  std::size_t loss_scales = 3;
  LossType loss_type = LossType::kL1;
  Strategy strategy = Strategy::kAlbedoFirst;
  double depth_temperature = 10.0;  // beta of the soft depth projection

  /// lr_init > lr_final > 0 (or both exactly 0), epochs and batch >= 1,
  /// 1 <= loss_scales <= 3, temperature > 0.
  void validate() const;
};

/// Ground truth of one measurement. Index s holds scale s + 1; coarser
/// scales are 2x2 average pools of the finer one.
struct TrainSample {
  physics::TransientMeasurement measurement;
  std::array<Tensor, network::kScales> albedo;  // [H_s x W_s]
  std::array<Tensor, network::kScales> depth;   // metres

  std::size_t elements(std::size_t scale_index) const { return albedo.at(scale_index).size(); }
};

/// Albedo image = max over z of the volume; depth image = argmax index * z_res.
TrainSample make_sample(const physics::TransientMeasurement& y, const physics::AlbedoVolume& gt);

/// sum over the first `scales` entries of (1/P_s) * norm(pred_s - target_s).
DiffTensor multiscale_loss(const std::array<DiffTensor, network::kScales>& predictions,
                           const std::array<Tensor, network::kScales>& targets, LossType type,
                           std::size_t scales);

/// L_albedo on albedo_project of each output.
DiffTensor albedo_loss(const network::BranchOutputs& out, const TrainSample& s, LossType type,
                       std::size_t scales);
/// L_depth on the soft depth projection of each output.
DiffTensor depth_loss(const network::BranchOutputs& out, const TrainSample& s, LossType type,
                      std::size_t scales, double temperature);

/// lr_final + (lr_init - lr_final) * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init, double lr_final);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of every tensor in `params`.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
               const AdamOptions& opt = {});

/// Albedo (eta) and depth (mu) branch parameters. In single-branch mode the
/// jointly trained theta is stored in both.
struct Model {
  network::NetworkConfig net;
  ParamSet albedo;
  ParamSet depth;
};

Model init_model(const network::NetworkConfig& net, std::uint64_t seed);
/// Parameters as one set, prefixed "albedo/" and "depth/".
ParamSet to_checkpoint(const Model& m);
Model from_checkpoint(const ParamSet& params, const network::NetworkConfig& net);

/// Network inputs of a measurement: F for the albedo branch, depth_mask(F)
/// for the depth branch.
struct SampleInputs {
  Tensor feature;
  Tensor masked;
};
SampleInputs sample_inputs(const physics::TransientMeasurement& y);

struct LossRecord {
  std::size_t stage = 1;
  std::string branch;  // albedo, depth or joint
  std::size_t epoch = 0;
  double loss = 0.0;   // mean over the epoch's batches, before each update
  double lr = 0.0;     // learning rate of the epoch's last step
};

struct StageSummary {
  std::string branch;
  double initial_loss = 0.0;  // at the stage's starting parameters
  double final_loss = 0.0;    // after the last update
};

struct TrainResult {
  std::vector<LossRecord> history;
  std::vector<StageSummary> stages;
};

/// Called after each stage with the current model.
using StageHook = std::function<void(std::size_t stage, const Model& model)>;

/// Decoupled optimisation. Albedo-first: eta on L_albedo, then mu on
/// L_depth with eta untouched; depth-first swaps the stages; single-branch
/// trains one theta on L_albedo + L_depth for stage1 + stage2 epochs.
/// Samples are visited in order, `batch_size` per step.
TrainResult train_two_stage(Model& model, const std::vector<TrainSample>& data,
                            const TrainConfig& cfg, const StageHook& hook = {});

/// Mean stage loss of `branch` ("albedo", "depth" or "joint") over `data`.
double evaluate_loss(const Model& model, const std::vector<TrainSample>& data,
                     const TrainConfig& cfg, std::string_view branch);

/// Voxels predicted for one measurement at full resolution, [n_z x H x W].
struct Reconstruction {
  Tensor albedo_voxel;
  Tensor depth_voxel;
  Tensor combined;
};
Reconstruction reconstruct(const Model& model, const physics::TransientMeasurement& y,
                           Strategy strategy);

}  // namespace nlos::training
