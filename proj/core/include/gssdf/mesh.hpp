#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gssdf/common.hpp"

namespace gssdf {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int32_t, 3>> triangles;
  std::vector<Vec3> normals;  // per vertex, optional (empty when absent)

  int64_t vertex_count() const { return static_cast<int64_t>(vertices.size()); }
  int64_t triangle_count() const { return static_cast<int64_t>(triangles.size()); }

  double triangle_area(int64_t t) const {
    const auto& tri = triangles[static_cast<size_t>(t)];
    const Vec3& a = vertices[static_cast<size_t>(tri[0])];
    const Vec3& b = vertices[static_cast<size_t>(tri[1])];
    const Vec3& c = vertices[static_cast<size_t>(tri[2])];
    return 0.5 * (b - a).cross(c - a).norm();
  }

  Aabb bounds() const {
    Aabb box;
    for (const Vec3& v : vertices) box.expand(v);
    return box;
  }

  /// Drops triangles with repeated vertices or area below `min_area`.
  void remove_degenerate_triangles(double min_area = 1e-14) {
    std::vector<std::array<int32_t, 3>> kept;
    kept.reserve(triangles.size());
    for (const auto& tri : triangles) {
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
      const Vec3& a = vertices[static_cast<size_t>(tri[0])];
      const Vec3& b = vertices[static_cast<size_t>(tri[1])];
      const Vec3& c = vertices[static_cast<size_t>(tri[2])];
      if (0.5 * (b - a).cross(c - a).norm() < min_area) continue;
      kept.push_back(tri);
    }
    triangles = std::move(kept);
  }
};

}  // namespace gssdf
