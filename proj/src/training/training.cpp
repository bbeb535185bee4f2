#include "nlos/training/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "nlos/common/error.hpp"
#include "nlos/tensor/ops.hpp"

namespace nlos::training {

std::string_view loss_type_name(LossType t) noexcept {
  switch (t) {
    case LossType::kL1:
      return "l1";
    case LossType::kMse:
      return "mse";
    case LossType::kL1Mse:
      return "l1+mse";
  }
  return "unknown";
}

std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::kAlbedoFirst:
      return "albedo-first";
    case Strategy::kDepthFirst:
      return "depth-first";
    case Strategy::kSingleBranch:
      return "single-branch";
  }
  return "unknown";
}

namespace {

std::string lowered(std::string_view text) {
  std::string s;
  for (char c : text) {
    s.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return s;
}

}  // namespace

LossType parse_loss_type(std::string_view text) {
  const std::string s = lowered(text);
  for (LossType t : {LossType::kL1, LossType::kMse, LossType::kL1Mse}) {
    if (s == loss_type_name(t)) return t;
  }
  throw ParameterError("unknown loss type: " + std::string(text));
}

Strategy parse_strategy(std::string_view text) {
  const std::string s = lowered(text);
  for (Strategy t : {Strategy::kAlbedoFirst, Strategy::kDepthFirst, Strategy::kSingleBranch}) {
    if (s == strategy_name(t)) return t;
  }
  throw ParameterError("unknown training strategy: " + std::string(text));
}

void TrainConfig::validate() const {
  const bool frozen = lr_init == 0.0 && lr_final == 0.0;
  if (!frozen && !(lr_init > lr_final && lr_final > 0.0)) {
    throw ParameterError("learning rates need lr_init > lr_final > 0");
  }
  if (stage1_epochs == 0 || stage2_epochs == 0) throw ParameterError("epochs must be >= 1");
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  if (loss_scales < 1 || loss_scales > network::kScales) {
    throw ParameterError("loss scale count must be 1, 2 or 3");
  }
  if (!(depth_temperature > 0.0)) throw ParameterError("depth temperature must be positive");
}

// --- samples and losses ------------------------------------------------------

TrainSample make_sample(const physics::TransientMeasurement& y, const physics::AlbedoVolume& gt) {
  y.validate();
  gt.validate();
  if (!(y.geometry == gt.geometry)) throw DimensionError("make_sample: geometry mismatch");
  const Tensor voxel = network::from_volume_layout(gt.values);
  TrainSample s{y, {}, {}};
  s.albedo[0] = network::albedo_project(DiffTensor(voxel)).value();
  s.depth[0] = network::depth_project(voxel, gt.geometry.z_res());
  for (std::size_t i = 1; i < network::kScales; ++i) {
    s.albedo[i] = network::avg_pool2(s.albedo[i - 1]);
    s.depth[i] = network::avg_pool2(s.depth[i - 1]);
  }
  return s;
}

DiffTensor multiscale_loss(const std::array<DiffTensor, network::kScales>& predictions,
                           const std::array<Tensor, network::kScales>& targets, LossType type,
                           std::size_t scales) {
  if (scales < 1 || scales > network::kScales) {
    throw ParameterError("multiscale_loss: scale count must be 1, 2 or 3");
  }
  DiffTensor total;
  for (std::size_t s = 0; s < scales; ++s) {
    if (predictions[s].shape() != targets[s].shape()) {
      throw DimensionError("multiscale_loss: scale " + std::to_string(s + 1) + " prediction " +
                           shape_string(predictions[s].shape()) + " vs target " +
                           shape_string(targets[s].shape()));
    }
    const double inv_p = 1.0 / static_cast<double>(targets[s].size());
    const DiffTensor diff = ops::sub(predictions[s], DiffTensor(targets[s]));
    DiffTensor term;
    if (type != LossType::kMse) term = ops::sum(ops::abs(diff));
    if (type != LossType::kL1) {
      const DiffTensor sq = ops::sum(ops::square(diff));
      term = term.defined() ? ops::add(term, sq) : sq;
    }
    term = ops::scale(term, inv_p);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

DiffTensor albedo_loss(const network::BranchOutputs& out, const TrainSample& s, LossType type,
                       std::size_t scales) {
  std::array<DiffTensor, network::kScales> pred;
  for (std::size_t i = 0; i < scales && i < network::kScales; ++i) {
    pred[i] = network::albedo_project(out[i]);
  }
  return multiscale_loss(pred, s.albedo, type, scales);
}

DiffTensor depth_loss(const network::BranchOutputs& out, const TrainSample& s, LossType type,
                      std::size_t scales, double temperature) {
  const double z_res = s.measurement.geometry.z_res();
  std::array<DiffTensor, network::kScales> pred;
  for (std::size_t i = 0; i < scales && i < network::kScales; ++i) {
    pred[i] = network::soft_depth_project(out[i], z_res, temperature);
  }
  return multiscale_loss(pred, s.depth, type, scales);
}

// --- optimisation --------------------------------------------------------------

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init, double lr_final) {
  if (step > total_steps) {
    throw ParameterError("cosine_lr: step " + std::to_string(step) + " beyond " +
                         std::to_string(total_steps));
  }
  if (total_steps == 0) return lr_init;
  const double phase = std::numbers::pi * static_cast<double>(step) /
                       static_cast<double>(total_steps);
  return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(phase));
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
               const AdamOptions& opt) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient count mismatch");
  if (state.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.emplace_back(params.value(i).shape());
      state.v.emplace_back(params.value(i).shape());
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: state size mismatch");
  ++state.t;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = grads.get(params.name(i));
    Tensor p = params.value(i);
    if (g.shape() != p.shape() || state.m[i].shape() != p.shape()) {
      throw DimensionError("adam_step: shape mismatch for " + params.name(i));
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * g[j];
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt.eps);
    }
    params.set(params.name(i), std::move(p));
  }
}

// --- model -------------------------------------------------------------------

Model init_model(const network::NetworkConfig& net, std::uint64_t seed) {
  return Model{net, network::init_branch(net, derive_seed(seed, 0)),
               network::init_branch(net, derive_seed(seed, 1))};
}

ParamSet to_checkpoint(const Model& m) {
  ParamSet p;
  p.merge(m.albedo, "albedo/");
  p.merge(m.depth, "depth/");
  return p;
}

Model from_checkpoint(const ParamSet& params, const network::NetworkConfig& net) {
  Model m{net, params.with_prefix_removed("albedo/"), params.with_prefix_removed("depth/")};
  network::check_branch(m.albedo, net);
  network::check_branch(m.depth, net);
  if (m.albedo.size() + m.depth.size() != params.size()) {
    throw DimensionError("checkpoint holds entries outside albedo/ and depth/");
  }
  return m;
}

SampleInputs sample_inputs(const physics::TransientMeasurement& y) {
  Tensor f = network::feature_transform(y).values.value();
  Tensor masked = network::depth_mask(f);
  return {std::move(f), std::move(masked)};
}

// --- training loop -------------------------------------------------------------

namespace {

enum class Objective { kAlbedo, kDepth, kJoint };

std::string_view objective_name(Objective o) {
  return o == Objective::kAlbedo ? "albedo" : o == Objective::kDepth ? "depth" : "joint";
}

Objective parse_objective(std::string_view s) {
  if (s == "albedo") return Objective::kAlbedo;
  if (s == "depth") return Objective::kDepth;
  if (s == "joint") return Objective::kJoint;
  throw ParameterError("unknown loss branch: " + std::string(s));
}

DiffTensor sample_loss(const ParamSet& params, Tape* tape, const network::NetworkConfig& net,
                       const SampleInputs& in, const TrainSample& s, const TrainConfig& cfg,
                       Objective o, Binder* shared) {
  Binder local(params, tape);
  Binder& bind = shared != nullptr ? *shared : local;
  const Tensor& x = o == Objective::kDepth ? in.masked : in.feature;
  const network::BranchOutputs out = network::branch_forward(DiffTensor(x), bind, net);
  switch (o) {
    case Objective::kAlbedo:
      return albedo_loss(out, s, cfg.loss_type, cfg.loss_scales);
    case Objective::kDepth:
      return depth_loss(out, s, cfg.loss_type, cfg.loss_scales, cfg.depth_temperature);
    case Objective::kJoint:
      return ops::add(albedo_loss(out, s, cfg.loss_type, cfg.loss_scales),
                      depth_loss(out, s, cfg.loss_type, cfg.loss_scales, cfg.depth_temperature));
  }
  return {};
}

double mean_loss(const ParamSet& params, const network::NetworkConfig& net,
                 const std::vector<SampleInputs>& inputs, const std::vector<TrainSample>& data,
                 const TrainConfig& cfg, Objective o) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += sample_loss(params, nullptr, net, inputs[i], data[i], cfg, o, nullptr).value()[0];
  }
  return total / static_cast<double>(data.size());
}

StageSummary run_stage(ParamSet& params, const network::NetworkConfig& net,
                       const std::vector<SampleInputs>& inputs,
                       const std::vector<TrainSample>& data, const TrainConfig& cfg,
                       Objective o, std::size_t stage, std::size_t epochs,
                       std::vector<LossRecord>& history) {
  const std::size_t batches = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = epochs * batches;
  StageSummary summary{std::string(objective_name(o)), 0.0, 0.0};
  summary.initial_loss = mean_loss(params, net, inputs, data, cfg, o);

  AdamState state;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double epoch_loss = 0.0, lr = 0.0;
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(data.size(), lo + cfg.batch_size);
      Tape tape;
      Binder bind(params, &tape);
      DiffTensor total;
      for (std::size_t i = lo; i < hi; ++i) {
        const DiffTensor l = sample_loss(params, &tape, net, inputs[i], data[i], cfg, o, &bind);
        total = total.defined() ? ops::add(total, l) : l;
      }
      total = ops::scale(total, 1.0 / static_cast<double>(hi - lo));
      tape.backward(total);
      lr = cosine_lr(step, total_steps, cfg.lr_init, cfg.lr_final);
      adam_step(params, bind.gradients(), state, lr);
      epoch_loss += total.value()[0];
    }
    history.push_back(LossRecord{stage, summary.branch, epoch,
                                 epoch_loss / static_cast<double>(batches), lr});
  }
  summary.final_loss = mean_loss(params, net, inputs, data, cfg, o);
  return summary;
}

}  // namespace

double evaluate_loss(const Model& model, const std::vector<TrainSample>& data,
                     const TrainConfig& cfg, std::string_view branch) {
  if (data.empty()) throw ParameterError("evaluate_loss: empty dataset");
  const Objective o = parse_objective(branch);
  std::vector<SampleInputs> inputs;
  for (const TrainSample& s : data) inputs.push_back(sample_inputs(s.measurement));
  const ParamSet& params = o == Objective::kDepth ? model.depth : model.albedo;
  return mean_loss(params, model.net, inputs, data, cfg, o);
}

TrainResult train_two_stage(Model& model, const std::vector<TrainSample>& data,
                            const TrainConfig& cfg, const StageHook& hook) {
  cfg.validate();
  if (data.empty()) throw ParameterError("train_two_stage: empty dataset");
  network::check_branch(model.albedo, model.net);
  network::check_branch(model.depth, model.net);

  std::vector<SampleInputs> inputs;
  inputs.reserve(data.size());
  for (const TrainSample& s : data) inputs.push_back(sample_inputs(s.measurement));

  TrainResult result;
  auto stage = [&](ParamSet& params, Objective o, std::size_t index, std::size_t epochs) {
    result.stages.push_back(
        run_stage(params, model.net, inputs, data, cfg, o, index, epochs, result.history));
    if (hook) hook(index, model);
  };

  switch (cfg.strategy) {
    case Strategy::kAlbedoFirst:
      stage(model.albedo, Objective::kAlbedo, 1, cfg.stage1_epochs);
      stage(model.depth, Objective::kDepth, 2, cfg.stage2_epochs);
      break;
    case Strategy::kDepthFirst:
      stage(model.depth, Objective::kDepth, 1, cfg.stage1_epochs);
      stage(model.albedo, Objective::kAlbedo, 2, cfg.stage2_epochs);
      break;
    case Strategy::kSingleBranch:
      stage(model.albedo, Objective::kJoint, 1, cfg.stage1_epochs + cfg.stage2_epochs);
      model.depth = model.albedo;
      break;
  }
  return result;
}

Reconstruction reconstruct(const Model& model, const physics::TransientMeasurement& y,
                           Strategy strategy) {
  const SampleInputs in = sample_inputs(y);
  Binder albedo_bind(model.albedo, nullptr);
  Reconstruction r;
  r.albedo_voxel = network::branch_forward(DiffTensor(in.feature), albedo_bind, model.net)[0].value();
  if (strategy == Strategy::kSingleBranch) {
    r.depth_voxel = r.albedo_voxel;
  } else {
    Binder depth_bind(model.depth, nullptr);
    r.depth_voxel =
        network::branch_forward(DiffTensor(in.masked), depth_bind, model.net)[0].value();
  }
  r.combined = network::render_combine(r.albedo_voxel, r.depth_voxel);
  return r;
}

}  // namespace nlos::training
