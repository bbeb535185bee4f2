#pragma once

#include <vector>

#include "nlos/common/rng.hpp"
#include "nlos/physics/geometry.hpp"

namespace nlos::physics {

enum class PrimitiveKind { kBox, kBlob, kLetter };

/// Axis-aligned shape in metres. (cx, cy, cz) is the centre and
/// (hx, hy, hz) the half extents of its bounding box. A blob is the
/// ellipsoid inscribed in that box; a letter is a 5x7 glyph stretched over
/// the box's x/y face and extruded through its depth.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double hx = 0.0, hy = 0.0, hz = 0.0;
  double albedo = 1.0;
  char glyph = 'L';

  bool contains(double x, double y, double z) const;
};

struct SceneSpec {
  std::vector<Primitive> primitives;

  /// Throws ParameterError if a primitive leaves the reconstruction volume,
  /// has non-positive extents, an albedo outside [0, 1] or an unknown glyph.
  void validate(const SamplingGeometry& g) const;
};

/// Voxels whose centre lies inside a primitive take its albedo; later
/// primitives overwrite earlier ones.
AlbedoVolume rasterize(const SceneSpec& scene, const SamplingGeometry& g);

/// 1-3 random boxes, blobs and letters inside the volume.
SceneSpec random_scene(Rng& rng, const SamplingGeometry& g);

bool glyph_supported(char c);

}  // namespace nlos::physics
