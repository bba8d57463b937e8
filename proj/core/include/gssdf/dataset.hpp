#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gssdf/camera.hpp"
#include "gssdf/lidar.hpp"
#include "gssdf/mesh.hpp"

namespace gssdf {

/// Canonical dataset directory:
///   intrinsics.txt          fx fy cx cy width height
///   poses.txt               frame_id tx ty tz qx qy qz qw (world-from-camera,
///                           Hamilton, unit norm)
///   images/%06d.png         8-bit RGB
///   lidar/%06d.ply          binary-little-endian, x y z world-frame endpoints
///   lidar/origins.txt       scan_id ox oy oz
///   gt/ (optional)          depth_%06d.png (16-bit, scale in depth_scale.txt),
///                           normal_%06d.png, gt_mesh.ply
struct Dataset {
  std::filesystem::path root;
  CameraIntrinsics intrinsics;
  std::vector<CameraFrame> frames;
  LidarData lidar;
  bool has_gt = false;
  double gt_depth_scale = 0.0;

  Aabb lidar_bounds() const;

  std::optional<Image> gt_depth(int frame_id) const;
  std::optional<Image> gt_normal(int frame_id) const;
  std::optional<TriangleMesh> gt_mesh() const;
};

Dataset load_dataset(const std::filesystem::path& root, bool load_images = true);

/// Writer used by the generator (and tests). Ground-truth products are
/// optional; all other sections are required by the format.
struct DatasetWriter {
  explicit DatasetWriter(std::filesystem::path root);

  void write_intrinsics(const CameraIntrinsics& intr);
  void write_poses(const std::vector<CameraFrame>& frames);
  void write_image(int frame_id, const Image& rgb);
  void write_lidar_scan(int scan_id, const LidarScan& scan);  // endpoints of valid returns
  void finish_lidar();                                        // origins.txt
  void write_gt_depth(int frame_id, const Image& depth, double scale);
  void write_gt_normal(int frame_id, const Image& normal);
  void write_gt_mesh(const TriangleMesh& mesh);

  std::filesystem::path root;

 private:
  std::vector<std::pair<int, Vec3>> origins_;
  double depth_scale_ = 0.0;
};

std::string frame_file_name(int frame_id, const std::string& prefix = "",
                            const std::string& ext = ".png");

/// Parses a poses.txt-style file (used by both the dataset reader and the
/// novel-view render command). Quaternion entries are validated to unit norm.
std::vector<CameraFrame> read_pose_file(const std::filesystem::path& path,
                                        const CameraIntrinsics& intr);
void write_pose_file(const std::filesystem::path& path, const std::vector<CameraFrame>& frames);

}  // namespace gssdf
