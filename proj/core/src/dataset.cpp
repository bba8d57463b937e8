#include "gssdf/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gssdf/ply.hpp"

namespace gssdf {

namespace fs = std::filesystem;

std::string frame_file_name(int frame_id, const std::string& prefix, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", frame_id);
  return prefix + buf + ext;
}

Aabb Dataset::lidar_bounds() const {
  Aabb box;
  for (const auto& scan : lidar.scans) {
    box.expand(scan.origin);
    for (size_t i = 0; i < scan.dirs.size(); ++i) {
      if (!scan.valid.empty() && !scan.valid[i]) continue;
      box.expand(scan.origin + scan.dist[i] * scan.dirs[i]);
    }
  }
  return box;
}

std::vector<CameraFrame> read_pose_file(const fs::path& path, const CameraIntrinsics& intr) {
  std::ifstream is(path);
  require(is.good(), "dataset: cannot open " + path.string());
  std::vector<CameraFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CameraFrame f;
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> f.frame_id >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      fail("dataset: malformed pose line " + std::to_string(line_no) + " in " + path.string());
    }
    const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    require(std::abs(norm - 1.0) < 1e-6, "dataset: non-unit quaternion at line " +
                                             std::to_string(line_no) + " in " + path.string());
    f.intr = intr;
    f.t_wc = Vec3(tx, ty, tz);
    f.rot_wc = Quat(qw, qx, qy, qz).toRotationMatrix();
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_pose_file(const fs::path& path, const std::vector<CameraFrame>& frames) {
  std::ofstream os(path);
  require(os.good(), "dataset: cannot write " + path.string());
  os.precision(17);
  for (const auto& f : frames) {
    const Quat q(f.rot_wc);
    os << f.frame_id << ' ' << f.t_wc.x() << ' ' << f.t_wc.y() << ' ' << f.t_wc.z() << ' '
       << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
  require(os.good(), "dataset: failed writing " + path.string());
}

Dataset load_dataset(const fs::path& root, bool load_images) {
  Dataset ds;
  ds.root = root;
  require(fs::is_directory(root), "dataset: " + root.string() + " is not a directory");

  {
    const fs::path p = root / "intrinsics.txt";
    std::ifstream is(p);
    require(is.good(), "dataset: cannot open " + p.string());
    if (!(is >> ds.intrinsics.fx >> ds.intrinsics.fy >> ds.intrinsics.cx >> ds.intrinsics.cy >>
          ds.intrinsics.width >> ds.intrinsics.height)) {
      fail("dataset: malformed " + p.string());
    }
    ds.intrinsics.validate();
  }

  ds.frames = read_pose_file(root / "poses.txt", ds.intrinsics);
  for (auto& f : ds.frames) {
    const fs::path img = root / "images" / frame_file_name(f.frame_id);
    if (load_images) {
      f.image = read_png_rgb8(img.string());
      require(f.image.width == ds.intrinsics.width && f.image.height == ds.intrinsics.height,
              "dataset: image size mismatch in " + img.string());
    } else {
      require(fs::exists(img), "dataset: missing image " + img.string());
    }
  }

  // lidar
  const fs::path origins_path = root / "lidar" / "origins.txt";
  if (fs::exists(origins_path)) {
    std::ifstream is(origins_path);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      int scan_id;
      Vec3 origin;
      if (!(ls >> scan_id >> origin.x() >> origin.y() >> origin.z())) {
        fail("dataset: malformed origin line " + std::to_string(line_no) + " in " +
             origins_path.string());
      }
      const fs::path scan_path = root / "lidar" / frame_file_name(scan_id, "", ".ply");
      const PlyPoints pts = read_ply_points(scan_path.string());
      const int ix = pts.column("x"), iy = pts.column("y"), iz = pts.column("z");
      require(ix >= 0 && iy >= 0 && iz >= 0,
              "dataset: lidar scan missing xyz in " + scan_path.string());
      LidarScan scan;
      scan.origin = origin;
      for (int64_t i = 0; i < pts.size(); ++i) {
        const Vec3 end(pts.columns[static_cast<size_t>(ix)][static_cast<size_t>(i)],
                       pts.columns[static_cast<size_t>(iy)][static_cast<size_t>(i)],
                       pts.columns[static_cast<size_t>(iz)][static_cast<size_t>(i)]);
        const Vec3 delta = end - origin;
        const double t = delta.norm();
        require(t > 1e-9, "dataset: degenerate lidar return in " + scan_path.string());
        scan.dirs.push_back(delta / t);
        scan.dist.push_back(t);
        scan.valid.push_back(1);
      }
      ds.lidar.scans.push_back(std::move(scan));
    }
  }

  const fs::path gt_dir = root / "gt";
  ds.has_gt = fs::is_directory(gt_dir);
  if (ds.has_gt) {
    const fs::path scale_path = gt_dir / "depth_scale.txt";
    if (fs::exists(scale_path)) {
      std::ifstream is(scale_path);
      is >> ds.gt_depth_scale;
    }
  }
  return ds;
}

std::optional<Image> Dataset::gt_depth(int frame_id) const {
  const fs::path p = root / "gt" / frame_file_name(frame_id, "depth_");
  if (!fs::exists(p) || gt_depth_scale <= 0) return std::nullopt;
  return read_png_gray16(p.string(), gt_depth_scale);
}

std::optional<Image> Dataset::gt_normal(int frame_id) const {
  const fs::path p = root / "gt" / frame_file_name(frame_id, "normal_");
  if (!fs::exists(p)) return std::nullopt;
  Image mapped = read_png_rgb8(p.string());
  for (auto& v : mapped.data) v = 2.0 * v - 1.0;
  return mapped;
}

std::optional<TriangleMesh> Dataset::gt_mesh() const {
  const fs::path p = root / "gt" / "gt_mesh.ply";
  if (!fs::exists(p)) return std::nullopt;
  return read_ply_mesh(p.string());
}

DatasetWriter::DatasetWriter(fs::path root_dir) : root(std::move(root_dir)) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "lidar");
}

void DatasetWriter::write_intrinsics(const CameraIntrinsics& intr) {
  std::ofstream os(root / "intrinsics.txt");
  os.precision(17);
  os << intr.fx << ' ' << intr.fy << ' ' << intr.cx << ' ' << intr.cy << ' ' << intr.width << ' '
     << intr.height << '\n';
  require(os.good(), "dataset: failed writing intrinsics");
}

void DatasetWriter::write_poses(const std::vector<CameraFrame>& frames) {
  write_pose_file(root / "poses.txt", frames);
}

void DatasetWriter::write_image(int frame_id, const Image& rgb) {
  write_png_rgb8((root / "images" / frame_file_name(frame_id)).string(), rgb);
}

void DatasetWriter::write_lidar_scan(int scan_id, const LidarScan& scan) {
  PlyPoints pts;
  pts.properties = {"x", "y", "z"};
  pts.columns.assign(3, {});
  for (size_t i = 0; i < scan.dirs.size(); ++i) {
    if (!scan.valid.empty() && !scan.valid[i]) continue;
    const Vec3 end = scan.origin + scan.dist[i] * scan.dirs[i];
    for (int a = 0; a < 3; ++a) pts.columns[static_cast<size_t>(a)].push_back(end[a]);
  }
  write_ply_points((root / "lidar" / frame_file_name(scan_id, "", ".ply")).string(), pts);
  origins_.emplace_back(scan_id, scan.origin);
}

void DatasetWriter::finish_lidar() {
  std::ofstream os(root / "lidar" / "origins.txt");
  os.precision(17);
  for (const auto& [id, origin] : origins_)
    os << id << ' ' << origin.x() << ' ' << origin.y() << ' ' << origin.z() << '\n';
  require(os.good(), "dataset: failed writing lidar origins");
}

void DatasetWriter::write_gt_depth(int frame_id, const Image& depth, double scale) {
  fs::create_directories(root / "gt");
  if (depth_scale_ == 0.0) {
    depth_scale_ = scale;
    std::ofstream os(root / "gt" / "depth_scale.txt");
    os.precision(17);
    os << scale << '\n';
  }
  write_png_gray16((root / "gt" / frame_file_name(frame_id, "depth_")).string(), depth, scale);
}

void DatasetWriter::write_gt_normal(int frame_id, const Image& normal) {
  fs::create_directories(root / "gt");
  write_png_normal((root / "gt" / frame_file_name(frame_id, "normal_")).string(), normal);
}

void DatasetWriter::write_gt_mesh(const TriangleMesh& mesh) {
  fs::create_directories(root / "gt");
  write_ply_mesh((root / "gt" / "gt_mesh.ply").string(), mesh);
}

}  // namespace gssdf
