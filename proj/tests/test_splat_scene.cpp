#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gssdf/splat_scene.hpp"
#include "testutil.hpp"

using namespace gssdf;
using testutil::close_rel;
using testutil::fd_slot;

namespace {
SplatDisk random_disk(Rng& rng) {
  SplatDisk s;
  s.p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  s.rot = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
  s.s_u = rng.uniform(0.05, 0.5);
  s.s_v = rng.uniform(0.05, 0.5);
  s.alpha = rng.uniform(0.1, 0.95);
  s.sh.assign(27, 0.0);
  for (auto& c : s.sh) c = rng.uniform(-0.5, 0.5);
  return s;
}
}  // namespace

TEST_CASE("disk_point: center and axis displacements") {
  SplatDisk s;
  s.p = Vec3(1, 2, 3);
  s.s_u = 2.0;
  const Mat3 R = Mat3::Identity();
  CHECK((disk_point(s.p, R.col(0), R.col(1), s.s_u, s.s_v, 0, 0) - s.p).norm() == 0.0);
  const Vec3 q = disk_point(s.p, R.col(0), R.col(1), 2.0, 1.0, 1.0, 0.0);
  CHECK((q - (s.p + 2.0 * Vec3::UnitX())).norm() < 1e-15);
}

TEST_CASE("disk kernel values and symmetry") {
  CHECK(disk_kernel(0, 0) == 1.0);
  CHECK(disk_kernel(1, 0) == doctest::Approx(std::exp(-0.5)));
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    CHECK(disk_kernel(a, b) == doctest::Approx(disk_kernel(b, a)));
    CHECK(disk_kernel(a, b) == doctest::Approx(disk_kernel(-a, -b)));
    CHECK(disk_kernel(a, b) > 0.0);
    CHECK(disk_kernel(a, b) <= 1.0);
  }
}

TEST_CASE("frames stay orthonormal right-handed for any raw quaternion") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    double q[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const Mat3 R = rotation_from_quat(q);
    CHECK((R.transpose() * R - Mat3::Identity()).norm() < 1e-12);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // n = t_u x t_v
    CHECK((R.col(0).cross(R.col(1)) - R.col(2)).norm() < 1e-12);
  }
}

TEST_CASE("disk_point partials match finite differences (rtol 1e-6)") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    double q[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double su = rng.uniform(0.2, 1.0), sv = rng.uniform(0.2, 1.0);
    const double u = rng.uniform(-2, 2), v = rng.uniform(-2, 2);

    auto eval = [&](int axis) {
      const Mat3 R = rotation_from_quat(q);
      return disk_point(p, R.col(0), R.col(1), su, sv, u, v)[axis];
    };

    const Mat3 R = rotation_from_quat(q);
    for (int axis = 0; axis < 3; ++axis) {
      // dp_s/dp = I
      for (int a = 0; a < 3; ++a) {
        const double fd = fd_slot([&] { return eval(axis); }, &p[a], 1e-6);
        CHECK(close_rel(fd, axis == a ? 1.0 : 0.0, 1e-6, 1e-7));
      }
      // dp_s/ds_u = t_u * u, dp_s/ds_v = t_v * v
      CHECK(close_rel(fd_slot([&] { return eval(axis); }, &su, 1e-6), R.col(0)[axis] * u, 1e-6,
                      1e-7));
      CHECK(close_rel(fd_slot([&] { return eval(axis); }, &sv, 1e-6), R.col(1)[axis] * v, 1e-6,
                      1e-7));
      // quaternion path: analytic adjoint vs finite differences
      Mat3 r_adj = Mat3::Zero();
      r_adj.col(0)[axis] = su * u;  // d(p_s)/d(t_u) = s_u u
      r_adj.col(1)[axis] = sv * v;
      double q_adj[4] = {0, 0, 0, 0};
      rotation_backward(q, r_adj, q_adj);
      for (int a = 0; a < 4; ++a) {
        const double fd = fd_slot([&] { return eval(axis); }, &q[a], 1e-6);
        CHECK(close_rel(q_adj[a], fd, 1e-6, 1e-8));
      }
    }
  }
}

TEST_CASE("sh_color: degree-0 and zero-coefficient behavior") {
  std::vector<double> coeffs(27, 0.0);
  const Vec3 d1 = Vec3(1, 2, 3).normalized();
  const Vec3 d2 = Vec3(-1, 0.5, 0.2).normalized();
  CHECK((sh_color(coeffs.data(), 2, d1) - Vec3(0.5, 0.5, 0.5)).norm() < 1e-15);
  coeffs[0] = 0.7;  // red dc only
  const Vec3 c1 = sh_color(coeffs.data(), 2, d1);
  const Vec3 c2 = sh_color(coeffs.data(), 2, d2);
  CHECK(c1.x() == doctest::Approx(0.7 * 0.28209479177387814 + 0.5));
  CHECK(c1.x() == doctest::Approx(c2.x()));  // direction-independent
  CHECK(c1.y() == doctest::Approx(0.5));
}

TEST_CASE("sh_color: coefficient gradient equals basis (finite differences)") {
  Rng rng(3);
  std::vector<double> coeffs(27);
  for (auto& c : coeffs) c = rng.uniform(-0.3, 0.3);
  const Vec3 dir = Vec3(0.3, -0.8, 0.52).normalized();
  double basis[9];
  sh_eval_basis(2, dir, basis);
  for (int b = 0; b < 9; ++b) {
    for (int ch = 0; ch < 3; ++ch) {
      const double fd = fd_slot(
          [&] { return sh_color(coeffs.data(), 2, dir)[ch]; }, &coeffs[size_t(3 * b + ch)], 1e-6);
      // gradient is the basis value unless the channel is clamped at zero
      const double expected = sh_color(coeffs.data(), 2, dir)[ch] > 0.0 ? basis[b] : 0.0;
      CHECK(close_rel(fd, expected, 1e-6, 1e-9));
    }
  }
}

TEST_CASE("scene append/get round trip and opacity bounds") {
  SplatScene scene(2);
  Rng rng(5);
  std::vector<SplatDisk> disks;
  for (int i = 0; i < 10; ++i) disks.push_back(random_disk(rng));
  disks[3].is_sky = true;
  scene.append(disks);
  CHECK(scene.size() == 10);
  CHECK(scene.sky_count() == 1);
  for (int i = 0; i < 10; ++i) {
    const SplatDisk s = scene.get(i);
    CHECK((s.p - disks[size_t(i)].p).norm() < 1e-12);
    CHECK(std::abs(s.alpha - disks[size_t(i)].alpha) < 1e-9);
    CHECK(s.alpha > 0.0);
    CHECK(s.alpha <= 1.0);
    CHECK(std::abs(s.s_u - disks[size_t(i)].s_u) < 1e-12);
    const double dot = std::abs(s.rot.coeffs().dot(disks[size_t(i)].rot.coeffs()));
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("densify: no stats and healthy opacity leaves scene unchanged") {
  SplatScene scene(2);
  Rng rng(6);
  std::vector<SplatDisk> disks;
  for (int i = 0; i < 8; ++i) disks.push_back(random_disk(rng));
  scene.append(disks);
  scene.stats().reset(scene.size());
  DensifyConfig cfg;
  auto report = scene.densify_and_prune(cfg, rng);
  CHECK(report.cloned == 0);
  CHECK(report.split == 0);
  CHECK(report.pruned == 0);
  CHECK(report.total_after == 8);
}

TEST_CASE("densify: transparent splat is pruned, sky exempt") {
  SplatScene scene(2);
  Rng rng(8);
  std::vector<SplatDisk> disks;
  for (int i = 0; i < 6; ++i) disks.push_back(random_disk(rng));
  disks[2].alpha = 1e-6;
  disks[4].alpha = 1e-6;
  disks[4].is_sky = true;  // exempt
  scene.append(disks);
  scene.stats().reset(scene.size());
  auto report = scene.densify_and_prune({}, rng);
  CHECK(report.pruned == 1);
  CHECK(report.total_after == 5);
  CHECK(scene.sky_count() == 1);
}

TEST_CASE("densify: high-gradient large splat splits into two shrunk children") {
  SplatScene scene(2);
  Rng rng(9);
  std::vector<SplatDisk> disks;
  for (int i = 0; i < 4; ++i) disks.push_back(random_disk(rng));
  disks[1].s_u = 0.3;  // above scale_split
  scene.append(disks);
  scene.stats().reset(scene.size());
  scene.stats().pos_grad_norm_sum[1] = 10.0;
  scene.stats().pos_grad_count[1] = 1;
  DensifyConfig cfg;
  cfg.grad_threshold = 1e-3;
  cfg.scale_split = 0.2;
  auto report = scene.densify_and_prune(cfg, rng);
  CHECK(report.split == 1);
  CHECK(report.total_after == 5);  // 4 - 1 + 2
  // the two children carry the shrunk scale
  int shrunk = 0;
  for (int64_t i = 0; i < scene.size(); ++i)
    if (std::abs(scene.get(i).s_u - 0.3 / 1.6) < 1e-9) ++shrunk;
  CHECK(shrunk == 2);
}

TEST_CASE("densify: small high-gradient splat clones") {
  SplatScene scene(2);
  Rng rng(10);
  std::vector<SplatDisk> disks = {random_disk(rng), random_disk(rng)};
  disks[0].s_u = disks[0].s_v = 0.01;
  scene.append(disks);
  scene.stats().reset(scene.size());
  scene.stats().pos_grad_norm_sum[0] = 5.0;
  scene.stats().pos_grad_count[0] = 1;
  DensifyConfig cfg;
  cfg.grad_threshold = 1e-3;
  cfg.scale_split = 0.2;
  auto report = scene.densify_and_prune(cfg, rng);
  CHECK(report.cloned == 1);
  CHECK(report.total_after == 3);
}

TEST_CASE("densify: emptying the scene aborts") {
  SplatScene scene(2);
  Rng rng(12);
  std::vector<SplatDisk> disks = {random_disk(rng)};
  disks[0].alpha = 1e-6;
  scene.append(disks);
  scene.stats().reset(scene.size());
  CHECK_THROWS(scene.densify_and_prune({}, rng));
}

TEST_CASE("scene save/load and PLY export round trip") {
  SplatScene scene(2);
  Rng rng(13);
  std::vector<SplatDisk> disks;
  for (int i = 0; i < 5; ++i) disks.push_back(random_disk(rng));
  disks[0].is_sky = true;
  scene.append(disks);

  std::stringstream ss;
  scene.save(ss);
  SplatScene loaded = SplatScene::load(ss);
  CHECK(loaded.size() == scene.size());
  CHECK(loaded.sky_count() == 1);
  for (int64_t i = 0; i < scene.size(); ++i)
    CHECK((loaded.position(i) - scene.position(i)).norm() == 0.0);

  const auto tmp = std::filesystem::temp_directory_path() / "gssdf_splats_test.ply";
  scene.export_ply(tmp.string());
  CHECK(std::filesystem::exists(tmp));
  std::filesystem::remove(tmp);
}

TEST_CASE("renormalize and clamp projections") {
  SplatScene scene(2);
  Rng rng(14);
  std::vector<SplatDisk> disks = {random_disk(rng)};
  scene.append(disks);
  scene.rotations().data()[0] = 3.0;  // denormalize
  scene.renormalize_rotations();
  const double* q = scene.rotations().data();
  CHECK(std::abs(std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) - 1.0) < 1e-12);
  scene.log_scales().data()[0] = std::log(100.0);
  scene.clamp_scales(1e-4, 2.0);
  CHECK(scene.scales(0)[0] == doctest::Approx(2.0));
}
