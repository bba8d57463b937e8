#include "gssdf/marching_cubes.hpp"

#include <array>
#include <cmath>
#include <unordered_map>

namespace gssdf {

namespace {

// Corner c has coordinates (c&1, c>>1&1, c>>2&1). Edges are listed x-first,
// then y, then z; each as (low corner, high corner).
constexpr int kEdgeCorners[12][2] = {
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x edges
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y edges
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z edges
};

// Face corner cycles (each consecutive pair is a face edge).
constexpr int kFaceCycles[6][4] = {
    {0, 2, 6, 4},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 3, 7, 6},  // y = 1
    {0, 1, 3, 2},  // z = 0
    {4, 5, 7, 6},  // z = 1
};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) ||
        (kEdgeCorners[e][0] == b && kEdgeCorners[e][1] == a))
      return e;
  }
  return -1;
}

struct CellTable {
  // per config: triangle list of edge indices, flattened (3 per triangle)
  std::array<std::vector<int8_t>, 256> tris;
};

Vec3 corner_pos(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

// Trilinear interpolation of corner occupancies (inside = -1, outside = +1)
// used only to orient triangle loops toward increasing field values.
double occupancy_at(int mask, const Vec3& p) {
  double v = 0.0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 cp = corner_pos(c);
    const double w = (cp.x() ? p.x() : 1 - p.x()) * (cp.y() ? p.y() : 1 - p.y()) *
                     (cp.z() ? p.z() : 1 - p.z());
    v += w * ((mask >> c) & 1 ? -1.0 : 1.0);
  }
  return v;
}

CellTable build_table() {
  CellTable table;
  for (int mask = 1; mask < 255; ++mask) {
    // per cut edge: the two segment partners discovered on adjacent faces
    std::array<std::array<int, 2>, 12> links;
    std::array<int, 12> link_count{};
    links.fill({-1, -1});

    auto add_segment = [&](int e0, int e1) {
      links[static_cast<size_t>(e0)][static_cast<size_t>(link_count[static_cast<size_t>(e0)]++)] = e1;
      links[static_cast<size_t>(e1)][static_cast<size_t>(link_count[static_cast<size_t>(e1)]++)] = e0;
    };

    for (const auto& cycle : kFaceCycles) {
      int cut[4], n_cut = 0;
      bool inside[4];
      for (int k = 0; k < 4; ++k) {
        const int a = cycle[k], b = cycle[(k + 1) % 4];
        inside[k] = ((mask >> a) & 1) != 0;
        if ((((mask >> a) & 1) != ((mask >> b) & 1))) cut[n_cut++] = edge_between(a, b);
      }
      if (n_cut == 2) {
        add_segment(cut[0], cut[1]);
      } else if (n_cut == 4) {
        // ambiguous face: separate the two diagonal inside corners; the rule
        // depends only on corner signs, so the adjacent cell agrees
        // face edges in cycle order: e_k between corner k and k+1
        int e[4];
        for (int k = 0; k < 4; ++k) e[k] = edge_between(cycle[k], cycle[(k + 1) % 4]);
        if (inside[0]) {  // corners 0 and 2 inside: cut around 0 (e3,e0), around 2 (e1,e2)
          add_segment(e[3], e[0]);
          add_segment(e[1], e[2]);
        } else {  // corners 1 and 3 inside
          add_segment(e[0], e[1]);
          add_segment(e[2], e[3]);
        }
      }
    }

    // walk closed loops over the cut edges
    std::array<bool, 12> visited{};
    for (int start = 0; start < 12; ++start) {
      if (link_count[static_cast<size_t>(start)] == 0 || visited[static_cast<size_t>(start)]) continue;
      std::vector<int> loop;
      int cur = start, prev = -1;
      while (true) {
        loop.push_back(cur);
        visited[static_cast<size_t>(cur)] = true;
        const auto& ln = links[static_cast<size_t>(cur)];
        const int next = (ln[0] == prev) ? ln[1] : ln[0];
        prev = cur;
        cur = next;
        if (cur == start) break;
      }
      if (loop.size() < 3) continue;

      // orient the loop so its normal points toward positive (outside)
      Vec3 centroid = Vec3::Zero();
      std::vector<Vec3> pts;
      for (int e : loop) {
        const Vec3 mid =
            0.5 * (corner_pos(kEdgeCorners[e][0]) + corner_pos(kEdgeCorners[e][1]));
        pts.push_back(mid);
        centroid += mid;
      }
      centroid /= static_cast<double>(loop.size());
      Vec3 normal = Vec3::Zero();  // Newell
      for (size_t k = 0; k < pts.size(); ++k) {
        const Vec3& a = pts[k];
        const Vec3& b = pts[(k + 1) % pts.size()];
        normal += (a - centroid).cross(b - centroid);
      }
      if (normal.norm() > 1e-12) {
        normal.normalize();
        const double eps = 0.25;
        const Vec3 probe_out = centroid + eps * normal;
        const Vec3 probe_in = centroid - eps * normal;
        if (occupancy_at(mask, probe_out) < occupancy_at(mask, probe_in)) {
          std::reverse(loop.begin(), loop.end());
        }
      }
      // fan triangulation
      for (size_t k = 1; k + 1 < loop.size(); ++k) {
        table.tris[static_cast<size_t>(mask)].push_back(static_cast<int8_t>(loop[0]));
        table.tris[static_cast<size_t>(mask)].push_back(static_cast<int8_t>(loop[k]));
        table.tris[static_cast<size_t>(mask)].push_back(static_cast<int8_t>(loop[k + 1]));
      }
    }
  }
  return table;
}

const CellTable& cell_table() {
  static const CellTable table = build_table();
  return table;
}

}  // namespace

TriangleMesh marching_cubes(const FieldBatchFn& field, const Aabb& bounds, double cell_size) {
  require(cell_size > 0, "marching_cubes: cell size must be positive");
  require(bounds.valid(), "marching_cubes: invalid bounds");
  const Vec3 ext = bounds.extent();
  const int nx = std::max(1, static_cast<int>(std::ceil(ext.x() / cell_size)));
  const int ny = std::max(1, static_cast<int>(std::ceil(ext.y() / cell_size)));
  const int nz = std::max(1, static_cast<int>(std::ceil(ext.z() / cell_size)));
  const int cx = nx + 1, cy = ny + 1;

  auto corner_world = [&](int ix, int iy, int iz) {
    return Vec3(bounds.min.x() + ix * cell_size, bounds.min.y() + iy * cell_size,
                bounds.min.z() + iz * cell_size);
  };

  // two z-slabs of corner values at a time
  const int64_t slab = static_cast<int64_t>(cx) * cy;
  std::vector<double> vals[2] = {std::vector<double>(static_cast<size_t>(slab)),
                                 std::vector<double>(static_cast<size_t>(slab))};
  std::vector<double> pts(static_cast<size_t>(3 * slab));
  auto eval_slab = [&](int iz, std::vector<double>& out) {
    for (int iy = 0; iy < cy; ++iy)
      for (int ix = 0; ix < cx; ++ix) {
        const Vec3 p = corner_world(ix, iy, iz);
        const int64_t k = static_cast<int64_t>(iy) * cx + ix;
        pts[static_cast<size_t>(3 * k)] = p.x();
        pts[static_cast<size_t>(3 * k + 1)] = p.y();
        pts[static_cast<size_t>(3 * k + 2)] = p.z();
      }
    field(pts.data(), slab, out.data());
  };

  TriangleMesh mesh;
  std::unordered_map<int64_t, int32_t> edge_to_vertex;
  const CellTable& table = cell_table();

  // global edge key: (corner linear index) * 3 + axis
  auto corner_index = [&](int ix, int iy, int iz) {
    return (static_cast<int64_t>(iz) * cy + iy) * cx + ix;
  };

  eval_slab(0, vals[0]);
  for (int iz = 0; iz < nz; ++iz) {
    eval_slab(iz + 1, vals[(iz + 1) & 1]);
    const std::vector<double>& lo = vals[iz & 1];
    const std::vector<double>& hi = vals[(iz + 1) & 1];
    auto value_at = [&](int ix, int iy, int dz) -> double {
      const auto& s = dz ? hi : lo;
      return s[static_cast<size_t>(iy) * cx + ix];
    };

    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        double v[8];
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          v[c] = value_at(ix + (c & 1), iy + ((c >> 1) & 1), (c >> 2) & 1);
          if (v[c] < 0.0) mask |= 1 << c;
        }
        const auto& tris = table.tris[static_cast<size_t>(mask)];
        if (tris.empty()) continue;

        auto vertex_on_edge = [&](int e) -> int32_t {
          const int c0 = kEdgeCorners[e][0], c1 = kEdgeCorners[e][1];
          const int gx = ix + (c0 & 1), gy = iy + ((c0 >> 1) & 1), gz = iz + ((c0 >> 2) & 1);
          const int axis = e < 4 ? 0 : (e < 8 ? 1 : 2);
          const int64_t key = corner_index(gx, gy, gz) * 3 + axis;
          auto it = edge_to_vertex.find(key);
          if (it != edge_to_vertex.end()) return it->second;
          const double v0 = v[c0], v1 = v[c1];
          const double t = v0 / (v0 - v1);  // endpoints differ in sign by construction
          const Vec3 p0 = corner_world(ix + (c0 & 1), iy + ((c0 >> 1) & 1), iz + ((c0 >> 2) & 1));
          const Vec3 p1 = corner_world(ix + (c1 & 1), iy + ((c1 >> 1) & 1), iz + ((c1 >> 2) & 1));
          const int32_t id = static_cast<int32_t>(mesh.vertices.size());
          mesh.vertices.push_back(p0 + t * (p1 - p0));
          edge_to_vertex.emplace(key, id);
          return id;
        };

        for (size_t k = 0; k + 2 < tris.size(); k += 3) {
          const int32_t a = vertex_on_edge(tris[k]);
          const int32_t b = vertex_on_edge(tris[k + 1]);
          const int32_t c = vertex_on_edge(tris[k + 2]);
          mesh.triangles.push_back({a, b, c});
        }
      }
    }
  }
  mesh.remove_degenerate_triangles();
  return mesh;
}

TriangleMesh marching_cubes(const SdfField& field, double cell_size) {
  const Aabb bounds = field.bounds();
  FieldBatchFn fn = [&field](const double* pts, int64_t n, double* out) {
    FieldQueryResult r;
    field.query_batch(pts, n, false, r);
    std::copy(r.sdf.begin(), r.sdf.end(), out);
  };
  return marching_cubes(fn, bounds, cell_size);
}

}  // namespace gssdf
