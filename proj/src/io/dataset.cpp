#include "nlos/io/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "nlos/common/error.hpp"
#include "nlos/io/container.hpp"
#include "nlos/physics/transport.hpp"

namespace nlos::io {

namespace {

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) {
    throw FormatError(std::string("geometry record: bad ") + what);
  }
  return static_cast<std::size_t>(v);
}

const Tensor& require(const ParamSet& p, const std::string& name) {
  if (!p.contains(name)) throw FormatError("missing record '" + name + "'");
  return p.get(name);
}

std::string scale_name(const char* base, std::size_t s) {
  return std::string(base) + "_s" + std::to_string(s + 1);
}

}  // namespace

Tensor geometry_record(const physics::SamplingGeometry& g) {
  return Tensor({7}, {static_cast<double>(g.n_x), static_cast<double>(g.n_y),
                      static_cast<double>(g.n_t), static_cast<double>(g.n_z), g.wall_extent,
                      g.bin_width, g.light_speed});
}

physics::SamplingGeometry geometry_from_record(const Tensor& t) {
  if (t.shape() != Shape{7}) throw FormatError("geometry record must have 7 entries");
  physics::SamplingGeometry g;
  g.n_x = as_count(t[0], "n_x");
  g.n_y = as_count(t[1], "n_y");
  g.n_t = as_count(t[2], "n_t");
  g.n_z = as_count(t[3], "n_z");
  g.wall_extent = t[4];
  g.bin_width = t[5];
  g.light_speed = t[6];
  g.validate();
  return g;
}

ParamSet measurement_records(const physics::TransientMeasurement& y) {
  ParamSet p;
  p.add("geometry", geometry_record(y.geometry));
  p.add("measurement", y.histogram);
  return p;
}

physics::TransientMeasurement measurement_from_records(const ParamSet& p) {
  physics::TransientMeasurement y{require(p, "measurement"),
                                  geometry_from_record(require(p, "geometry"))};
  try {
    y.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("measurement record: ") + e.what());
  }
  return y;
}

ParamSet sample_records(const physics::TransientMeasurement& y, const physics::AlbedoVolume& gt) {
  const training::TrainSample s = training::make_sample(y, gt);
  ParamSet p = measurement_records(y);
  p.add("albedo_volume", gt.values);
  for (std::size_t i = 0; i < network::kScales; ++i) p.add(scale_name("albedo", i), s.albedo[i]);
  for (std::size_t i = 0; i < network::kScales; ++i) p.add(scale_name("depth", i), s.depth[i]);
  return p;
}

training::TrainSample sample_from_records(const ParamSet& p) {
  training::TrainSample s;
  s.measurement = measurement_from_records(p);
  for (std::size_t i = 0; i < network::kScales; ++i) {
    s.albedo[i] = require(p, scale_name("albedo", i));
    s.depth[i] = require(p, scale_name("depth", i));
  }
  const std::size_t h = s.measurement.geometry.n_x, w = s.measurement.geometry.n_y;
  for (std::size_t i = 0; i < network::kScales; ++i) {
    const Shape want{h >> i, w >> i};
    if (s.albedo[i].shape() != want || s.depth[i].shape() != want) {
      throw FormatError("target " + scale_name("albedo/depth", i) + " should be " +
                        shape_string(want));
    }
  }
  return s;
}

ParamSet simulate(const RunConfig& cfg, const physics::SceneSpec& scene, std::uint64_t index) {
  const physics::AlbedoVolume gt = physics::rasterize(scene, cfg.geometry);
  physics::TransientMeasurement y = physics::forward_measure(gt);
  if (cfg.noise) {
    physics::NoiseModel nm = cfg.noise_model;
    nm.seed = derive_seed(cfg.noise_model.seed, index);
    y = physics::add_noise(y, nm);
  }
  return sample_records(y, gt);
}

ParamSet generate_sample(const RunConfig& cfg, std::uint64_t seed, std::uint64_t index) {
  Rng rng(derive_seed(seed, index));
  return simulate(cfg, physics::random_scene(rng, cfg.geometry), index);
}

std::string sample_file_name(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05llu.nlt", static_cast<unsigned long long>(index));
  return buf;
}

std::vector<std::filesystem::path> generate_dataset(const RunConfig& cfg,
                                                    const std::filesystem::path& dir,
                                                    std::size_t count, std::uint64_t seed) {
  std::vector<std::filesystem::path> paths;
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    paths.push_back(dir / sample_file_name(i));
    write_container(paths.back(), generate_sample(cfg, seed, i));
  }
  return paths;
}

std::vector<training::TrainSample> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.starts_with("sample_") && name.ends_with(".nlt")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<training::TrainSample> out;
  for (const auto& f : files) out.push_back(sample_from_records(read_container(f)));
  return out;
}

std::string loss_history_csv(const std::vector<training::LossRecord>& history) {
  std::string s = "stage,branch,epoch,loss,lr\n";
  char buf[64];
  for (const training::LossRecord& r : history) {
    s += std::to_string(r.stage) + ',' + r.branch + ',' + std::to_string(r.epoch) + ',';
    s.append(buf, std::to_chars(buf, buf + sizeof(buf), r.loss).ptr);
    s += ',';
    s.append(buf, std::to_chars(buf, buf + sizeof(buf), r.lr).ptr);
    s += '\n';
  }
  return s;
}

void write_loss_history(const std::filesystem::path& path,
                        const std::vector<training::LossRecord>& history) {
  const std::string text = loss_history_csv(history);
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace nlos::io
