#pragma once

#include "gssdf/common.hpp"
#include "gssdf/image.hpp"

namespace gssdf {

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    require(fx > 0 && fy > 0, "intrinsics: focal lengths must be positive");
    require(width > 0 && height > 0, "intrinsics: empty image plane");
  }
};

/// Pinhole camera: x right, y down, z forward; pose is world-from-camera.
/// Pixel (i, j) rays pass through the pixel center (i+0.5, j+0.5).
struct CameraFrame {
  CameraIntrinsics intr;
  Mat3 rot_wc = Mat3::Identity();
  Vec3 t_wc = Vec3::Zero();
  Image image;  // ground-truth RGB when training; may be empty
  int frame_id = -1;

  Vec3 center() const { return t_wc; }

  Vec3 pixel_dir_cam(double px, double py) const {
    return Vec3((px - intr.cx) / intr.fx, (py - intr.cy) / intr.fy, 1.0).normalized();
  }
  Vec3 pixel_dir_world(int i, int j) const {
    return rot_wc * pixel_dir_cam(i + 0.5, j + 0.5);
  }

  Vec3 world_to_cam(const Vec3& p) const { return rot_wc.transpose() * (p - t_wc); }
  Vec3 cam_to_world(const Vec3& p) const { return rot_wc * p + t_wc; }

  /// Projects to pixel coordinates; false when behind the camera.
  bool project(const Vec3& p_world, double& px, double& py, double& z) const {
    const Vec3 pc = world_to_cam(p_world);
    z = pc.z();
    if (z <= 1e-9) return false;
    px = intr.fx * pc.x() / z + intr.cx;
    py = intr.fy * pc.y() / z + intr.cy;
    return true;
  }

  void validate() const {
    intr.validate();
    require((rot_wc.transpose() * rot_wc - Mat3::Identity()).norm() < 1e-6,
            "camera pose: rotation not orthonormal");
  }
};

}  // namespace gssdf
