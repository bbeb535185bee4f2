#include "nlos/io/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "nlos/common/error.hpp"

namespace nlos::io {

void RunConfig::validate() const {
  geometry.validate();
  if (network.depth_bins != geometry.n_z) {
    throw ConfigError("network depth bins must equal n_z");
  }
  network.validate();
  train.validate();
  if (noise_model.dark_count_rate < 0.0) throw ConfigError("dark_count_rate must be >= 0");
  scene.validate(geometry);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("not a number: '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("not a non-negative integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::array<std::size_t, 3> to_ratio(const std::string& v) {
  std::array<std::size_t, 3> r{};
  std::size_t part = 0, start = 0;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ':') {
      if (part == 3) throw ConfigError("split_ratio needs three parts, e.g. 1:1:2");
      r[part++] = to_uint(v.substr(start, i - start));
      start = i + 1;
    }
  }
  if (part != 3) throw ConfigError("split_ratio needs three parts, e.g. 1:1:2");
  return r;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

physics::Primitive to_primitive(const std::string& v) {
  const std::vector<std::string> w = words(v);
  if (w.empty()) throw ConfigError("empty primitive");
  physics::Primitive p;
  std::size_t at = 1;
  if (w[0] == "box") {
    p.kind = physics::PrimitiveKind::kBox;
  } else if (w[0] == "blob") {
    p.kind = physics::PrimitiveKind::kBlob;
  } else if (w[0] == "letter") {
    p.kind = physics::PrimitiveKind::kLetter;
    if (w.size() < 2 || w[1].size() != 1) throw ConfigError("letter primitive needs a glyph");
    p.glyph = w[1][0];
    at = 2;
  } else {
    throw ConfigError("unknown primitive kind '" + w[0] + "'");
  }
  if (w.size() != at + 7) throw ConfigError("primitive needs cx cy cz hx hy hz albedo");
  double* fields[] = {&p.cx, &p.cy, &p.cz, &p.hx, &p.hy, &p.hz, &p.albedo};
  for (std::size_t i = 0; i < 7; ++i) *fields[i] = to_double(w[at + i]);
  return p;
}

std::string primitive_text(const physics::Primitive& p) {
  std::string s;
  switch (p.kind) {
    case physics::PrimitiveKind::kBox:
      s = "box";
      break;
    case physics::PrimitiveKind::kBlob:
      s = "blob";
      break;
    case physics::PrimitiveKind::kLetter:
      s = std::string("letter ") + p.glyph;
      break;
  }
  for (double v : {p.cx, p.cy, p.cz, p.hx, p.hy, p.hz, p.albedo}) s += " " + fmt(v);
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_x", [](RunConfig& c, const std::string& v) { c.geometry.n_x = to_uint(v); }},
      {"n_y", [](RunConfig& c, const std::string& v) { c.geometry.n_y = to_uint(v); }},
      {"n_t", [](RunConfig& c, const std::string& v) { c.geometry.n_t = to_uint(v); }},
      {"n_z", [](RunConfig& c, const std::string& v) { c.geometry.n_z = to_uint(v); }},
      {"wall_extent", [](RunConfig& c, const std::string& v) { c.geometry.wall_extent = to_double(v); }},
      {"bin_width", [](RunConfig& c, const std::string& v) { c.geometry.bin_width = to_double(v); }},
      {"light_speed", [](RunConfig& c, const std::string& v) { c.geometry.light_speed = to_double(v); }},
      {"base_channels", [](RunConfig& c, const std::string& v) { c.network.base_channels = to_uint(v); }},
      {"patch", [](RunConfig& c, const std::string& v) { c.network.block.patch = to_uint(v); }},
      {"k", [](RunConfig& c, const std::string& v) { c.network.block.k = to_uint(v); }},
      {"k_s", [](RunConfig& c, const std::string& v) { c.network.block.k_s = to_uint(v); }},
      {"variant", [](RunConfig& c, const std::string& v) { c.network.block.variant = graph::parse_aggregation(v); }},
      {"split_ratio", [](RunConfig& c, const std::string& v) { c.network.block.split_ratio = to_ratio(v); }},
      {"expand_ratio", [](RunConfig& c, const std::string& v) { c.network.block.expand_ratio = to_uint(v); }},
      {"lr_init", [](RunConfig& c, const std::string& v) { c.train.lr_init = to_double(v); }},
      {"lr_final", [](RunConfig& c, const std::string& v) { c.train.lr_final = to_double(v); }},
      {"stage1_epochs", [](RunConfig& c, const std::string& v) { c.train.stage1_epochs = to_uint(v); }},
      {"stage2_epochs", [](RunConfig& c, const std::string& v) { c.train.stage2_epochs = to_uint(v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_uint(v); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_uint(v); }},
      {"loss_scales", [](RunConfig& c, const std::string& v) { c.train.loss_scales = to_uint(v); }},
      {"loss_type", [](RunConfig& c, const std::string& v) { c.train.loss_type = training::parse_loss_type(v); }},
      {"strategy", [](RunConfig& c, const std::string& v) { c.train.strategy = training::parse_strategy(v); }},
      {"depth_temperature", [](RunConfig& c, const std::string& v) { c.train.depth_temperature = to_double(v); }},
      {"noise", [](RunConfig& c, const std::string& v) { c.noise = to_bool(v); }},
      {"dark_count_rate", [](RunConfig& c, const std::string& v) { c.noise_model.dark_count_rate = to_double(v); }},
      {"noise_seed", [](RunConfig& c, const std::string& v) { c.noise_model.seed = to_uint(v); }},
      {"samples", [](RunConfig& c, const std::string& v) { c.samples = to_uint(v); }},
      {"data_seed", [](RunConfig& c, const std::string& v) { c.data_seed = to_uint(v); }},
      {"dataset_dir", [](RunConfig& c, const std::string& v) { c.dataset_dir = v; }},
      {"checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; }},
      {"loss_history", [](RunConfig& c, const std::string& v) { c.loss_history = v; }},
      {"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      {"primitive", [](RunConfig& c, const std::string& v) { c.scene.primitives.push_back(to_primitive(v)); }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->second(c, value);
    } catch (const Error& e) {
      throw ConfigError("line " + std::to_string(line_no) + " (" + key + "): " + e.what());
    }
  }
  c.network.depth_bins = c.geometry.n_z;
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  const auto& g = c.geometry;
  const auto& b = c.network.block;
  const auto& t = c.train;
  o << "# geometry\n"
    << "n_x = " << g.n_x << "\nn_y = " << g.n_y << "\nn_t = " << g.n_t << "\nn_z = " << g.n_z
    << "\nwall_extent = " << fmt(g.wall_extent) << "\nbin_width = " << fmt(g.bin_width)
    << "\nlight_speed = " << fmt(g.light_speed) << "\n\n# network\n"
    << "base_channels = " << c.network.base_channels << "\npatch = " << b.patch << "\nk = " << b.k
    << "\nk_s = " << b.k_s << "\nvariant = " << graph::aggregation_name(b.variant)
    << "\nsplit_ratio = " << b.split_ratio[0] << ':' << b.split_ratio[1] << ':' << b.split_ratio[2]
    << "\nexpand_ratio = " << b.expand_ratio << "\n\n# training\n"
    << "lr_init = " << fmt(t.lr_init) << "\nlr_final = " << fmt(t.lr_final)
    << "\nstage1_epochs = " << t.stage1_epochs << "\nstage2_epochs = " << t.stage2_epochs
    << "\nbatch_size = " << t.batch_size << "\nseed = " << t.seed
    << "\nloss_scales = " << t.loss_scales << "\nloss_type = " << training::loss_type_name(t.loss_type)
    << "\nstrategy = " << training::strategy_name(t.strategy)
    << "\ndepth_temperature = " << fmt(t.depth_temperature) << "\n\n# noise\n"
    << "noise = " << (c.noise ? "true" : "false")
    << "\ndark_count_rate = " << fmt(c.noise_model.dark_count_rate)
    << "\nnoise_seed = " << c.noise_model.seed << "\n\n# data and paths\n"
    << "samples = " << c.samples << "\ndata_seed = " << c.data_seed
    << "\ndataset_dir = " << c.dataset_dir << "\ncheckpoint = " << c.checkpoint
    << "\nloss_history = " << c.loss_history << "\noutput_dir = " << c.output_dir << '\n';
  if (!c.scene.primitives.empty()) o << "\n# scene\n";
  for (const physics::Primitive& p : c.scene.primitives) o << "primitive = " << primitive_text(p) << '\n';
  return o.str();
}

}  // namespace nlos::io
