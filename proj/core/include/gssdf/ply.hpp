#pragma once

#include <string>
#include <vector>

#include "gssdf/mesh.hpp"

namespace gssdf {

/// Column-major point cloud with named per-vertex properties.
struct PlyPoints {
  std::vector<std::string> properties;
  std::vector<std::vector<double>> columns;  // one column per property

  int64_t size() const { return columns.empty() ? 0 : static_cast<int64_t>(columns[0].size()); }
  int column(const std::string& name) const;  // -1 when absent
};

/// Writers emit binary-little-endian PLY by default; readers accept both
/// binary-little-endian and ascii, float or double properties.
void write_ply_points(const std::string& path, const PlyPoints& points, bool binary = true);
PlyPoints read_ply_points(const std::string& path);

void write_ply_mesh(const std::string& path, const TriangleMesh& mesh, bool binary = true);
TriangleMesh read_ply_mesh(const std::string& path);

}  // namespace gssdf
