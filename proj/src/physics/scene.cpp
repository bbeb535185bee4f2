#include "nlos/physics/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "nlos/common/error.hpp"

namespace nlos::physics {
namespace {

struct Glyph {
  char c;
  std::array<const char*, 7> rows;  // row 0 at the smallest y
};

constexpr std::array<Glyph, 8> kGlyphs{{
    {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
    {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
    {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
    {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
    {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
    {'X', {"#...#", ".#.#.", "..#..", "..#..", "..#..", ".#.#.", "#...#"}},
}};

const Glyph* find_glyph(char c) {
  for (const Glyph& g : kGlyphs) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

constexpr double kTol = 1e-12;

}  // namespace

bool glyph_supported(char c) { return find_glyph(c) != nullptr; }

bool Primitive::contains(double x, double y, double z) const {
  const double ux = x - cx, uy = y - cy, uz = z - cz;
  switch (kind) {
    case PrimitiveKind::kBox:
      return std::abs(ux) <= hx && std::abs(uy) <= hy && std::abs(uz) <= hz;
    case PrimitiveKind::kBlob: {
      const double a = ux / hx, b = uy / hy, c = uz / hz;
      return a * a + b * b + c * c <= 1.0;
    }
    case PrimitiveKind::kLetter: {
      if (std::abs(ux) > hx || std::abs(uy) > hy || std::abs(uz) > hz) return false;
      const Glyph* g = find_glyph(glyph);
      if (g == nullptr) return false;
      int col = static_cast<int>(std::floor((ux + hx) / (2.0 * hx) * 5.0));
      int row = static_cast<int>(std::floor((uy + hy) / (2.0 * hy) * 7.0));
      col = std::min(col, 4);
      row = std::min(row, 6);
      return g->rows[static_cast<std::size_t>(row)][col] == '#';
    }
  }
  return false;
}

void SceneSpec::validate(const SamplingGeometry& g) const {
  const double half = g.wall_extent / 2.0;
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const Primitive& p = primitives[i];
    const std::string tag = "scene primitive " + std::to_string(i);
    if (!(p.hx > 0.0 && p.hy > 0.0 && p.hz > 0.0)) {
      throw ParameterError(tag + ": half extents must be positive");
    }
    if (!(p.albedo >= 0.0 && p.albedo <= 1.0)) {
      throw ParameterError(tag + ": albedo must lie in [0, 1]");
    }
    if (p.kind == PrimitiveKind::kLetter && !glyph_supported(p.glyph)) {
      throw ParameterError(tag + ": unsupported glyph '" + std::string(1, p.glyph) + "'");
    }
    const bool inside = p.cx - p.hx >= -half - kTol && p.cx + p.hx <= half + kTol &&
                        p.cy - p.hy >= -half - kTol && p.cy + p.hy <= half + kTol &&
                        p.cz - p.hz >= -kTol && p.cz + p.hz <= g.z_extent() + kTol;
    if (!inside) throw ParameterError(tag + ": lies outside the reconstruction volume");
  }
}

AlbedoVolume rasterize(const SceneSpec& scene, const SamplingGeometry& g) {
  g.validate();
  scene.validate(g);
  AlbedoVolume vol{Tensor(g.volume_shape()), g};
  for (const Primitive& p : scene.primitives) {
    for (std::size_t u = 0; u < g.n_x; ++u) {
      for (std::size_t v = 0; v < g.n_y; ++v) {
        for (std::size_t w = 0; w < g.n_z; ++w) {
          if (p.contains(g.x_center(u), g.y_center(v), g.z_center(w))) {
            vol.values.at(u, v, w) = p.albedo;
          }
        }
      }
    }
  }
  return vol;
}

SceneSpec random_scene(Rng& rng, const SamplingGeometry& g) {
  g.validate();
  const double half = g.wall_extent / 2.0;
  const double zext = g.z_extent();
  SceneSpec scene;
  const int count = static_cast<int>(std::uniform_int_distribution<int>(1, 3)(rng));
  for (int n = 0; n < count; ++n) {
    Primitive p;
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    p.kind = kind == 0 ? PrimitiveKind::kBox
                       : (kind == 1 ? PrimitiveKind::kBlob : PrimitiveKind::kLetter);
    // Lateral size between 3 and 8 scan pitches per side, thin in depth.
    p.hx = uniform(rng, 1.5, 4.0) * g.pitch_x();
    p.hy = uniform(rng, 1.5, 4.0) * g.pitch_y();
    p.hz = uniform(rng, 0.5, 1.5) * g.z_res();
    if (p.kind == PrimitiveKind::kLetter) {
      p.hx = std::max(p.hx, 2.5 * g.pitch_x());
      p.hy = std::max(p.hy, 3.5 * g.pitch_y());
      p.glyph = kGlyphs[std::uniform_int_distribution<std::size_t>(0, kGlyphs.size() - 1)(rng)].c;
    }
    p.hx = std::min(p.hx, half);
    p.hy = std::min(p.hy, half);
    p.cx = uniform(rng, -half + p.hx, half - p.hx);
    p.cy = uniform(rng, -half + p.hy, half - p.hy);
    p.cz = uniform(rng, 0.25 * zext + p.hz, 0.9 * zext - p.hz);
    p.albedo = uniform(rng, 0.4, 1.0);
    scene.primitives.push_back(p);
  }
  return scene;
}

}  // namespace nlos::physics
