// nlos: simulate, train and evaluate the dual-branch graph reconstructor.
//
// Exit codes: 0 success, 1 usage error, 2 validation or verification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nlos/common/error.hpp"
#include "nlos/io/config.hpp"
#include "nlos/io/container.hpp"
#include "nlos/io/dataset.hpp"
#include "nlos/io/image.hpp"
#include "nlos/kernels/kernels.hpp"
#include "nlos/training/metrics.hpp"
#include "nlos/training/training.hpp"
#include "nlos/verify/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace nlos;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailed = 2;

struct Options {
  std::string config;
  std::string kernels;

  std::string out;
  std::string data;
  std::string checkpoint;
  std::string history;
  std::string measurement;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::uint64_t index = 0;
  std::size_t instances = 5;
  std::size_t trials = 20;
  double tolerance = 1e-4;
};

io::RunConfig config_of(const Options& o) {
  return o.config.empty() ? io::parse_config("") : io::load_config(o.config);
}

std::string or_default(const std::string& v, const std::string& fallback) {
  return v.empty() ? fallback : v;
}

int cmd_render(const Options& o) {
  const io::RunConfig cfg = config_of(o);
  const std::uint64_t seed = o.seed.value_or(cfg.data_seed);
  ParamSet records;
  if (cfg.scene.primitives.empty()) {
    records = io::generate_sample(cfg, seed, o.index);
  } else {
    records = io::simulate(cfg, cfg.scene, o.index);
  }
  const fs::path out = or_default(o.out, (fs::path(cfg.output_dir) / "measurement.nlt").string());
  io::write_container(out, records);
  std::printf("wrote %s (peak count %.6g)\n", out.string().c_str(), records.get("measurement").max());
  return kOk;
}

int cmd_dataset(const Options& o) {
  const io::RunConfig cfg = config_of(o);
  const fs::path dir = or_default(o.out, cfg.dataset_dir);
  const std::size_t n = o.samples.value_or(cfg.samples);
  const auto paths = io::generate_dataset(cfg, dir, n, o.seed.value_or(cfg.data_seed));
  std::printf("wrote %zu samples to %s\n", paths.size(), dir.string().c_str());
  return kOk;
}

int cmd_train(const Options& o) {
  const io::RunConfig cfg = config_of(o);
  const std::vector<training::TrainSample> data = io::load_dataset(or_default(o.data, cfg.dataset_dir));
  if (data.empty()) throw ParameterError("dataset is empty");
  training::Model model = training::init_model(cfg.network, cfg.train.seed);
  const training::TrainResult res = training::train_two_stage(model, data, cfg.train);
  for (std::size_t i = 0; i < res.stages.size(); ++i) {
    std::printf("stage %zu (%s): loss %.6g -> %.6g\n", i + 1, res.stages[i].branch.c_str(),
                res.stages[i].initial_loss, res.stages[i].final_loss);
  }
  const fs::path ckpt = or_default(o.checkpoint, cfg.checkpoint);
  const fs::path hist = or_default(o.history, cfg.loss_history);
  io::write_container(ckpt, training::to_checkpoint(model));
  io::write_loss_history(hist, res.history);
  std::printf("wrote %s and %s\n", ckpt.string().c_str(), hist.string().c_str());
  return kOk;
}

training::Model load_model(const io::RunConfig& cfg, const Options& o) {
  return training::from_checkpoint(io::read_container(or_default(o.checkpoint, cfg.checkpoint)),
                                   cfg.network);
}

int cmd_reconstruct(const Options& o) {
  const io::RunConfig cfg = config_of(o);
  const training::Model model = load_model(cfg, o);
  const fs::path in = or_default(o.measurement, (fs::path(cfg.output_dir) / "measurement.nlt").string());
  const physics::TransientMeasurement y = io::measurement_from_records(io::read_container(in));
  if (!(y.geometry == cfg.geometry)) throw ConfigError("measurement geometry differs from the config");

  const training::Reconstruction r = training::reconstruct(model, y, cfg.train.strategy);
  const fs::path dir = or_default(o.out, cfg.output_dir);
  ParamSet records;
  records.add("geometry", io::geometry_record(y.geometry));
  records.add("albedo_voxel", network::to_volume_layout(r.albedo_voxel));
  records.add("depth_voxel", network::to_volume_layout(r.depth_voxel));
  records.add("combined", network::to_volume_layout(r.combined));
  io::write_container(dir / "reconstruction.nlt", records);
  io::write_pgm(dir / "albedo.pgm", network::albedo_project(DiffTensor(r.combined)).value());
  io::write_pgm(dir / "depth.pgm", network::depth_project(r.depth_voxel, y.geometry.z_res()));
  std::printf("wrote reconstruction.nlt, albedo.pgm and depth.pgm to %s\n", dir.string().c_str());
  return kOk;
}

int cmd_eval(const Options& o) {
  const io::RunConfig cfg = config_of(o);
  const training::Model model = load_model(cfg, o);
  const std::vector<training::TrainSample> data = io::load_dataset(or_default(o.data, cfg.dataset_dir));
  if (data.empty()) throw ParameterError("dataset is empty");
  std::printf("%-8s %10s %10s %10s %10s\n", "sample", "PSNR", "SSIM", "RMSE", "MAD");
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const training::Reconstruction r = training::reconstruct(model, data[i].measurement, cfg.train.strategy);
    const Tensor albedo = training::clamp(network::albedo_project(DiffTensor(r.albedo_voxel)).value(), 0.0, 1.0);
    const Tensor depth = network::depth_project(r.depth_voxel, cfg.geometry.z_res());
    const double m[4] = {training::psnr(albedo, data[i].albedo[0]), training::ssim(albedo, data[i].albedo[0]),
                         training::rmse(depth, data[i].depth[0]), training::mad(depth, data[i].depth[0])};
    std::printf("%-8zu %10.4f %10.4f %10.4f %10.4f\n", i, m[0], m[1], m[2], m[3]);
    for (int j = 0; j < 4; ++j) sums[j] += m[j];
  }
  const double n = static_cast<double>(data.size());
  std::printf("%-8s %10.4f %10.4f %10.4f %10.4f\n", "mean", sums[0] / n, sums[1] / n, sums[2] / n,
              sums[3] / n);
  return kOk;
}

int cmd_gradcheck(const Options& o) {
  const auto entries = verify::gradient_suite(o.instances, o.seed.value_or(0), o.tolerance);
  bool ok = true;
  for (const auto& e : entries) {
    std::printf("%-4s %-28s max rel err %.3e over %zu instances\n", e.passed ? "ok" : "FAIL",
                e.name.c_str(), e.max_error, e.instances);
    ok = ok && e.passed;
  }
  return ok ? kOk : kFailed;
}

int cmd_adjointcheck(const Options& o) {
  const io::RunConfig cfg = config_of(o);
  const verify::AdjointReport rep = verify::adjoint_check(cfg.geometry, o.trials, o.seed.value_or(0));
  const bool ok = rep.max_discrepancy < 1e-10;
  std::printf("adjoint identity over %zu trials: relative discrepancy %.3e (%s)\n", rep.trials,
              rep.max_discrepancy, ok ? "ok" : "FAIL");
  return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-line-of-sight reconstruction with dual-branch graph networks"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--kernels", o.kernels, "Kernel backend: scalar or avx2")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  auto with_config = [&](CLI::App* c) {
    c->add_option("-c,--config", o.config, "Run configuration file")->check(CLI::ExistingFile);
  };
  auto* render = app.add_subcommand("render", "Simulate one measurement from the config scene");
  with_config(render);
  render->add_option("-o,--out", o.out, "Output container");
  render->add_option("--seed", o.seed, "Scene seed when the config has no primitives");
  render->add_option("--index", o.index, "Sample index for seed derivation");

  auto* dataset = app.add_subcommand("dataset", "Generate a synthetic training set");
  with_config(dataset);
  dataset->add_option("-o,--out", o.out, "Output directory");
  dataset->add_option("-n,--samples", o.samples, "Number of samples");
  dataset->add_option("--seed", o.seed, "Dataset seed");

  auto* train = app.add_subcommand("train", "Two-stage training on a dataset directory");
  with_config(train);
  train->add_option("-d,--data", o.data, "Dataset directory");
  train->add_option("--checkpoint", o.checkpoint, "Checkpoint to write");
  train->add_option("--history", o.history, "Loss history CSV to write");

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct albedo and depth from a measurement");
  with_config(reconstruct);
  reconstruct->add_option("-m,--measurement", o.measurement, "Measurement container");
  reconstruct->add_option("--checkpoint", o.checkpoint, "Trained checkpoint");
  reconstruct->add_option("-o,--out", o.out, "Output directory");

  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of albedo and RMSE/MAD of depth on a dataset");
  with_config(eval);
  eval->add_option("-d,--data", o.data, "Dataset directory");
  eval->add_option("--checkpoint", o.checkpoint, "Trained checkpoint");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--instances", o.instances, "Seeded instances per case")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", o.seed, "Suite seed");
  gradcheck->add_option("--tolerance", o.tolerance, "Maximum relative error");

  auto* adjoint = app.add_subcommand("adjointcheck", "Dot-product test of the transport operator");
  with_config(adjoint);
  adjoint->add_option("--trials", o.trials, "Random trials")->check(CLI::PositiveNumber);
  adjoint->add_option("--seed", o.seed, "Trial seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (o.kernels == "scalar") kernels::set_backend(kernels::Backend::kScalar);
    if (o.kernels == "avx2") kernels::set_backend(kernels::Backend::kAvx2);
    if (render->parsed()) return cmd_render(o);
    if (dataset->parsed()) return cmd_dataset(o);
    if (train->parsed()) return cmd_train(o);
    if (reconstruct->parsed()) return cmd_reconstruct(o);
    if (eval->parsed()) return cmd_eval(o);
    if (gradcheck->parsed()) return cmd_gradcheck(o);
    if (adjoint->parsed()) return cmd_adjointcheck(o);
  } catch (const nlos::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
