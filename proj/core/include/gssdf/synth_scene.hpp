#pragma once

#include <string>
#include <vector>

#include "gssdf/common.hpp"

namespace gssdf {

/// Analytic signed-distance scene composed from primitives under union (min).
/// The SDF is exact for each convex primitive; the room shell is the negated
/// interior box.
class AnalyticScene {
 public:
  struct Primitive {
    enum class Type { Sphere, Box, InvertedBox, Plane } type;
    Vec3 center = Vec3::Zero();    // sphere/box center
    Vec3 half_extent = Vec3::One();  // box
    double radius = 1.0;           // sphere
    Vec3 normal = Vec3::UnitZ();   // plane: n.p - offset
    double offset = 0.0;
    Vec3 albedo = Vec3(0.7, 0.7, 0.7);
  };

  std::string name;
  std::vector<Primitive> primitives;
  Aabb bounds;

  double sdf(const Vec3& p) const;
  /// SDF plus the albedo of the closest primitive.
  double sdf_albedo(const Vec3& p, Vec3* albedo) const;
  /// Central-difference surface normal (h = 1e-6).
  Vec3 normal_at(const Vec3& p) const;

  /// Lambertian shade with a fixed directional light and constant ambient.
  Vec3 shade(const Vec3& p, const Vec3& n) const;
};

/// Built-in scenes: "sphere", "box_room", "street".
AnalyticScene make_scene(const std::string& name);
std::vector<std::string> builtin_scene_names();

}  // namespace gssdf
