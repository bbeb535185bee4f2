#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nlos/io/config.hpp"
#include "nlos/training/training.hpp"

namespace nlos::io {

/// Geometry as a 7-element record: n_x n_y n_t n_z wall_extent bin_width c.
Tensor geometry_record(const physics::SamplingGeometry& g);
physics::SamplingGeometry geometry_from_record(const Tensor& t);

/// Records "geometry" and "measurement" ([n_x x n_y x n_t]).
ParamSet measurement_records(const physics::TransientMeasurement& y);
physics::TransientMeasurement measurement_from_records(const ParamSet& p);

/// One training sample: measurement records plus "albedo_volume"
/// ([n_x x n_y x n_z]) and the projected targets "albedo_s1..3" and
/// "depth_s1..3".
ParamSet sample_records(const physics::TransientMeasurement& y, const physics::AlbedoVolume& gt);
training::TrainSample sample_from_records(const ParamSet& p);

/// Scene -> volume -> measurement, noised when the config asks for it. The
/// noise seed of sample `index` is derive_seed(noise_seed, index).
ParamSet simulate(const RunConfig& cfg, const physics::SceneSpec& scene, std::uint64_t index);

/// Sample `index` of the dataset defined by (cfg, seed): a random scene from
/// Rng(derive_seed(seed, index)).
ParamSet generate_sample(const RunConfig& cfg, std::uint64_t seed, std::uint64_t index);

std::string sample_file_name(std::uint64_t index);

/// Writes `count` sample files into `dir` and returns their paths.
std::vector<std::filesystem::path> generate_dataset(const RunConfig& cfg,
                                                    const std::filesystem::path& dir,
                                                    std::size_t count, std::uint64_t seed);

/// Every sample file of `dir` in name order.
std::vector<training::TrainSample> load_dataset(const std::filesystem::path& dir);

/// CSV with header stage,branch,epoch,loss,lr; values in shortest
/// round-trip form.
std::string loss_history_csv(const std::vector<training::LossRecord>& history);
void write_loss_history(const std::filesystem::path& path,
                        const std::vector<training::LossRecord>& history);

}  // namespace nlos::io
