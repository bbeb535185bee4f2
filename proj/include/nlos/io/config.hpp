#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nlos/network/network.hpp"
#include "nlos/physics/noise.hpp"
#include "nlos/physics/scene.hpp"
#include "nlos/training/training.hpp"

namespace nlos::io {

/// Everything a CLI run needs. Text form: one `key = value` per line, `#`
/// starts a comment, unknown keys are errors. Scenes are given as repeated
///   primitive = box    cx cy cz hx hy hz albedo
///   primitive = blob   cx cy cz hx hy hz albedo
///   primitive = letter G cx cy cz hx hy hz albedo
/// lines (metres).
struct RunConfig {
  physics::SamplingGeometry geometry;
  network::NetworkConfig network;  // depth_bins follows geometry.n_z
  training::TrainConfig train;

  bool noise = false;
  physics::NoiseModel noise_model;

  std::size_t samples = 4;
  std::uint64_t data_seed = 1;
  std::string dataset_dir = "data";
  std::string checkpoint = "model.nlt";
  std::string loss_history = "loss.csv";
  std::string output_dir = "out";

  physics::SceneSpec scene;

  /// Re-checks geometry, network, training and scene invariants.
  void validate() const;
};

/// Throws ConfigError with the offending line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& c);

}  // namespace nlos::io
