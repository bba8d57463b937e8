#pragma once

#include <functional>

#include "gssdf/mesh.hpp"
#include "gssdf/sdf_field.hpp"

namespace gssdf {

/// Batched scalar-field evaluation: fills out[i] for each of the n points
/// (xyz interleaved).
using FieldBatchFn = std::function<void(const double* pts, int64_t n, double* out)>;

/// Zero-isosurface triangulation on a uniform grid with edge-interpolated
/// vertices and a 256-case cell table. Cells sharing a face always agree on
/// the face's segment topology, so closed surfaces come out watertight.
/// Vertices are welded on shared grid edges; output order is fixed by cell
/// index. Returns an empty mesh when the field never changes sign.
TriangleMesh marching_cubes(const FieldBatchFn& field, const Aabb& bounds, double cell_size);

/// Convenience overload for the neural field (queries are batched).
TriangleMesh marching_cubes(const SdfField& field, double cell_size);

}  // namespace gssdf
