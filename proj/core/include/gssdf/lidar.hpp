#pragma once

#include <vector>

#include "gssdf/common.hpp"

namespace gssdf {

/// One LiDAR sweep: a sensor origin plus rays with measured ranges.
struct LidarScan {
  Vec3 origin = Vec3::Zero();
  std::vector<Vec3> dirs;      // unit directions, world frame
  std::vector<double> dist;    // measured range t per ray
  double max_range = 100.0;
  std::vector<uint8_t> valid;  // dropout mask, 1 = usable return

  size_t size() const { return dirs.size(); }
};

struct LidarData {
  std::vector<LidarScan> scans;

  int64_t total_returns() const {
    int64_t n = 0;
    for (const auto& s : scans)
      for (uint8_t v : s.valid) n += v ? 1 : 0;
    return n;
  }
};

/// Flat view over all valid returns, for O(1) uniform ray draws.
struct FlatRays {
  std::vector<Vec3> origins;
  std::vector<Vec3> dirs;
  std::vector<double> dist;

  int64_t size() const { return static_cast<int64_t>(dirs.size()); }
  Aabb endpoint_bounds() const;
};

FlatRays flatten(const LidarData& data);

}  // namespace gssdf
