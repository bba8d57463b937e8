#include <cmath>

#include "doctest.h"
#include "gssdf/rasterizer.hpp"
#include "gssdf/ssim.hpp"
#include "testutil.hpp"

using namespace gssdf;
using testutil::close_rel;

namespace {

CameraFrame make_camera(int w = 8, int h = 8, double f = 8.0) {
  CameraFrame cam;
  cam.intr = {f, f, w / 2.0, h / 2.0, w, h};
  cam.rot_wc = Mat3::Identity();
  cam.t_wc = Vec3::Zero();
  return cam;
}

/// Disk at distance `z` facing the camera (normal -z so it faces back along
/// the ray), with degree-0 color.
SplatDisk facing_disk(double z, double scale, double alpha, const Vec3& rgb) {
  SplatDisk s;
  s.p = Vec3(0, 0, z);
  // identity frame: t_u = x, t_v = y, n = z; flipped at render time
  s.rot = Quat::Identity();
  s.s_u = s.s_v = scale;
  s.alpha = alpha;
  s.sh.assign(27, 0.0);
  for (int c = 0; c < 3; ++c) s.sh[static_cast<size_t>(c)] = (rgb[c] - 0.5) / 0.28209479177387814;
  return s;
}

SplatScene random_scene(Rng& rng, int n, double spread = 0.8, double zlo = 2.0, double zhi = 6.0) {
  SplatScene scene(2);
  std::vector<SplatDisk> disks;
  for (int i = 0; i < n; ++i) {
    SplatDisk s;
    s.p = Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
               rng.uniform(zlo, zhi));
    s.rot = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
    s.s_u = rng.uniform(0.1, 0.6);
    s.s_v = rng.uniform(0.1, 0.6);
    s.alpha = rng.uniform(0.2, 0.9);
    s.sh.assign(27, 0.0);
    for (auto& c : s.sh) c = rng.uniform(-0.15, 0.15);
    disks.push_back(s);
  }
  scene.append(disks);
  return scene;
}

}  // namespace

TEST_CASE("intersect_disk: axial hit and parallel miss") {
  const Vec3 p(0, 0, 5);
  const Mat3 R = Mat3::Identity();
  double u, v, t;
  // ray along +z from origin, disk normal = z
  CHECK(intersect_disk(Vec3::Zero(), Vec3::UnitZ(), p, R.col(0), R.col(1), R.col(2), 1.0, 1.0, u,
                       v, t));
  CHECK(u == doctest::Approx(0.0));
  CHECK(v == doctest::Approx(0.0));
  CHECK(t == doctest::Approx(5.0));
  // ray parallel to the disk plane
  CHECK(!intersect_disk(Vec3::Zero(), Vec3::UnitX(), p, R.col(0), R.col(1), R.col(2), 1.0, 1.0,
                        u, v, t));
  // plane behind the origin
  CHECK(!intersect_disk(Vec3(0, 0, 10), Vec3::UnitZ(), p, R.col(0), R.col(1), R.col(2), 1.0, 1.0,
                        u, v, t));
}

TEST_CASE("intersect_disk: reprojection residual on random rays") {
  Rng rng(31);
  int hits = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double q[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const Mat3 R = rotation_from_quat(q);
    const double su = rng.uniform(0.1, 2.0), sv = rng.uniform(0.1, 2.0);
    const Vec3 o(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Vec3 d = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    double u, v, t;
    if (!intersect_disk(o, d, p, R.col(0), R.col(1), R.col(2), su, sv, u, v, t)) continue;
    const Vec3 world = disk_point(p, R.col(0), R.col(1), su, sv, u, v);
    const Vec3 on_ray = o + t * d;
    CHECK((world - on_ray).norm() < 1e-9);
    ++hits;
  }
  CHECK(hits > 100);
}

TEST_CASE("render: opaque disk pierced at its exact center") {
  auto cam = make_camera();
  // place the disk center exactly on the pixel (4,4) center ray
  const Vec3 dir = cam.pixel_dir_world(4, 4);
  const double t_hit = 5.0;
  SplatScene scene(2);
  SplatDisk disk = facing_disk(0.0, 100.0, 1.0, Vec3(0.8, 0.3, 0.6));
  disk.p = cam.center() + t_hit * dir;
  scene.append(std::vector<SplatDisk>{disk});

  const auto out = render(scene, cam);
  const double alpha_stored = scene.opacity(0);  // logit storage caps just below 1
  CHECK(alpha_stored > 1.0 - 1e-6);
  CHECK(out.alpha.at(4, 4) == doctest::Approx(alpha_stored).epsilon(1e-12));
  const Vec3 expect = sh_color(scene.sh_coeffs(0), 2, dir);
  for (int c = 0; c < 3; ++c)
    CHECK(out.color.at(4, 4, c) == doctest::Approx(alpha_stored * expect[c]).epsilon(1e-9));
  const double z_expected = cam.world_to_cam(disk.p).z();
  CHECK(out.depth.at(4, 4) == doctest::Approx(z_expected).epsilon(1e-9));
}

TEST_CASE("render: empty scene gives background") {
  SplatScene scene(2);
  auto cam = make_camera();
  const auto out = render(scene, cam);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      CHECK(out.alpha.at(x, y) == 0.0);
      CHECK(out.color.at(x, y, 0) == 0.0);
      CHECK(out.depth.at(x, y) == 0.0);
    }
}

TEST_CASE("render: front opaque disk annihilates the back one at the pixel center") {
  // 1x1 camera: the single pixel ray passes through both disk centers
  auto cam = make_camera(1, 1, 1.0);
  cam.intr.cx = 0.5;
  cam.intr.cy = 0.5;
  const Vec3 dir = cam.pixel_dir_world(0, 0);
  SplatScene scene(2);
  SplatDisk front = facing_disk(0.0, 100.0, 1.0, Vec3(0.9, 0.1, 0.1));
  SplatDisk back = facing_disk(0.0, 100.0, 1.0, Vec3(0.1, 0.9, 0.1));
  front.p = cam.center() + 3.0 * dir;
  back.p = cam.center() + 6.0 * dir;
  scene.append(std::vector<SplatDisk>{front, back});

  const auto out = render(scene, cam);
  const double a0 = scene.opacity(0);
  const Vec3 expect = sh_color(scene.sh_coeffs(0), 2, dir);
  for (int c = 0; c < 3; ++c)
    CHECK(out.color.at(0, 0, c) == doctest::Approx(a0 * expect[c]).epsilon(1e-6));
  CHECK(out.splat_weights[1] < 1e-6);  // transmittance annihilated
  CHECK(out.depth.at(0, 0) == doctest::Approx(cam.world_to_cam(front.p).z()).epsilon(1e-6));
}

TEST_CASE("render: conservation and brute-force oracle agreement on random scenes") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    SplatScene scene = random_scene(rng, 30);
    auto cam = make_camera(24, 18, 16.0);
    RenderConfig tiled;
    tiled.tile = 8;
    RenderConfig brute = tiled;
    brute.brute_force = true;
    const auto a = render(scene, cam, tiled);
    const auto b = render(scene, cam, brute);
    double sum_alpha = 0.0, sum_w = 0.0;
    for (int y = 0; y < cam.intr.height; ++y)
      for (int x = 0; x < cam.intr.width; ++x) {
        CHECK(std::abs(a.alpha.at(x, y) - b.alpha.at(x, y)) < 1e-6);
        for (int c = 0; c < 3; ++c)
          CHECK(std::abs(a.color.at(x, y, c) - b.color.at(x, y, c)) < 1e-6);
        CHECK(std::abs(a.depth.at(x, y) - b.depth.at(x, y)) < 1e-6);
        CHECK(a.alpha.at(x, y) >= 0.0);
        CHECK(a.alpha.at(x, y) <= 1.0 + 1e-12);
        sum_alpha += a.alpha.at(x, y);
      }
    for (double w : a.splat_weights) {
      CHECK(w >= 0.0);
      sum_w += w;
    }
    // double-count identity: per-view weights sum equals the alpha image sum
    CHECK(close_rel(sum_w, sum_alpha, 1e-6, 1e-9));
  }
}

TEST_CASE("render: output invariant to splat ordering") {
  Rng rng(19);
  SplatScene scene = random_scene(rng, 15);
  auto cam = make_camera(16, 16, 12.0);
  const auto a = render(scene, cam);

  // rebuild with reversed order
  SplatScene rev(2);
  std::vector<SplatDisk> disks;
  for (int64_t i = scene.size() - 1; i >= 0; --i) disks.push_back(scene.get(i));
  rev.append(disks);
  const auto b = render(rev, cam);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(a.color.at(x, y, c) - b.color.at(x, y, c)) < 1e-9);
}

namespace {

/// Fixed random projection of all four outputs, as a differentiable scalar.
struct RenderObjective {
  SplatScene* scene;
  CameraFrame cam;
  std::vector<double> wc, wd, wn, wa;

  RenderObjective(SplatScene* s, const CameraFrame& c, Rng& rng) : scene(s), cam(c) {
    const int64_t px = static_cast<int64_t>(c.intr.width) * c.intr.height;
    wc.resize(static_cast<size_t>(3 * px));
    wd.resize(static_cast<size_t>(px));
    wn.resize(static_cast<size_t>(3 * px));
    wa.resize(static_cast<size_t>(px));
    for (auto& v : wc) v = rng.uniform(-1, 1);
    for (auto& v : wd) v = rng.uniform(-1, 1);
    for (auto& v : wn) v = rng.uniform(-1, 1);
    for (auto& v : wa) v = rng.uniform(-1, 1);
  }

  double value() const {
    const auto out = render(*scene, cam);
    double L = 0.0;
    for (size_t k = 0; k < wc.size(); ++k) L += wc[k] * out.color.data[k];
    for (size_t k = 0; k < wd.size(); ++k) L += wd[k] * out.depth.data[k];
    for (size_t k = 0; k < wn.size(); ++k) L += wn[k] * out.normal.data[k];
    for (size_t k = 0; k < wa.size(); ++k) L += wa[k] * out.alpha.data[k];
    return L;
  }

  void backward() {
    for (ParamTensor* p : scene->all_params()) p->zero_grad();
    Tape tape;
    auto nodes = render_op(tape, *scene, cam);
    ValueId loss = tape.weighted_sum(
        {tape.dot_const(nodes.color, wc), tape.dot_const(nodes.depth, wd),
         tape.dot_const(nodes.normal, wn), tape.dot_const(nodes.alpha, wa)},
        {1, 1, 1, 1});
    tape.backward(loss);
  }
};

}  // namespace

TEST_CASE("render_backward: single-splat opacity gradient matches finite differences") {
  SplatScene scene(2);
  std::vector<SplatDisk> disks = {facing_disk(5.0, 2.0, 0.6, Vec3(0.8, 0.4, 0.3))};
  scene.append(disks);
  auto cam = make_camera();
  Rng rng(3);
  RenderObjective obj(&scene, cam, rng);
  obj.backward();
  const double an = scene.opacity_logits().grad()[0];
  const double fd = testutil::fd_slot([&] { return obj.value(); },
                                      &scene.opacity_logits().data()[0], 1e-6);
  CHECK(close_rel(an, fd, 1e-4, 1e-9));
}

TEST_CASE("render_backward: full attribute Jacobian-vector check, 20 splats, 8x8") {
  Rng rng(23);
  SplatScene scene = random_scene(rng, 20);
  auto cam = make_camera(8, 8, 8.0);
  RenderObjective obj(&scene, cam, rng);
  obj.backward();

  // copy analytic grads, then probe every attribute group
  struct Probe {
    ParamTensor* t;
    double h;
    const char* name;
  };
  Probe probes[] = {
      {&scene.positions(), 1e-6, "position"},     {&scene.rotations(), 1e-6, "rotation"},
      {&scene.log_scales(), 1e-6, "log_scale"},   {&scene.opacity_logits(), 1e-6, "opacity"},
      {&scene.sh(), 1e-6, "sh"},
  };
  Rng pick(5);
  int checked = 0, skipped = 0;
  for (const auto& probe : probes) {
    std::vector<double> an(probe.t->grad(), probe.t->grad() + probe.t->size());
    const int n_probe = static_cast<int>(std::min<int64_t>(40, probe.t->size()));
    for (int k = 0; k < n_probe; ++k) {
      const int64_t idx =
          probe.t->size() > 40 ? pick.uniform_index(probe.t->size()) : static_cast<int64_t>(k);
      const double fd =
          testutil::fd_slot([&] { return obj.value(); }, &probe.t->data()[idx], probe.h);
      if (std::abs(fd - an[static_cast<size_t>(idx)]) >
          1e-3 * std::max({std::abs(fd), std::abs(an[static_cast<size_t>(idx)]), 1e-4})) {
        // cutoff boundaries (kernel clamp, termination, color clamp) are
        // non-differentiable; verify it is genuinely such a boundary by
        // shrinking the stencil and requiring FD instability
        const double fd2 =
            testutil::fd_slot([&] { return obj.value(); }, &probe.t->data()[idx], probe.h * 0.1);
        if (std::abs(fd2 - an[static_cast<size_t>(idx)]) <
            1e-3 * std::max({std::abs(fd2), std::abs(an[static_cast<size_t>(idx)]), 1e-4})) {
          ++skipped;  // converged to analytic with smaller h: boundary artifact
          continue;
        }
        CAPTURE(probe.name);
        CAPTURE(idx);
        CHECK(close_rel(an[static_cast<size_t>(idx)], fd, 1e-3, 1e-4));
      }
      ++checked;
    }
  }
  CHECK(checked >= 150);
  CHECK(skipped <= 10);
}

TEST_CASE("render_backward: zero adjoint produces zero gradients") {
  Rng rng(29);
  SplatScene scene = random_scene(rng, 5);
  for (ParamTensor* p : scene.all_params()) p->zero_grad();
  Tape tape;
  auto nodes = render_op(tape, scene, make_camera());
  ValueId loss = tape.scale(tape.sum(nodes.color), 0.0);
  tape.backward(loss);
  for (ParamTensor* p : scene.all_params())
    for (int64_t i = 0; i < p->size(); ++i) CHECK(p->grad()[i] == 0.0);
}

TEST_CASE("loss_color: zero at identity, constant-image closed form") {
  Rng rng(37);
  Image a(16, 16, 3);
  for (auto& v : a.data) v = rng.uniform(0, 1);
  CHECK(loss_color(a, a) == doctest::Approx(0.0));

  // gt = 0, render = 1: L1 = 1, SSIM from the closed form on constants
  Image ones(16, 16, 3), zeros(16, 16, 3);
  for (auto& v : ones.data) v = 1.0;
  const double c1 = 1e-4, c2 = 9e-4;
  // mu_x=1, mu_y=0, all (co)variances 0
  const double ssim_const = (c1 * c2) / ((1.0 + c1) * c2);
  const double expect = 0.8 * 1.0 + 0.2 * (1.0 - ssim_const) / 2.0;
  CHECK(loss_color(ones, zeros) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss_color: gradient matches finite differences on an 8x8 pair") {
  Rng rng(41);
  // ssim needs at least the window size
  Image a(12, 12, 3), gt(12, 12, 3);
  for (auto& v : a.data) v = rng.uniform(0.1, 0.9);
  for (auto& v : gt.data) v = rng.uniform(0.1, 0.9);

  Tape tape;
  RenderNodes nodes;
  nodes.width = 12;
  nodes.height = 12;
  nodes.color = tape.alloc_value(a.data);
  ValueId loss = color_loss_op(tape, nodes, gt);
  tape.backward(loss);
  const auto& grad = tape.grad(nodes.color);

  Rng pick(43);
  for (int k = 0; k < 30; ++k) {
    const size_t idx = static_cast<size_t>(pick.uniform_index(static_cast<int64_t>(a.data.size())));
    const double fd = testutil::fd_slot([&] { return loss_color(a, gt); }, &a.data[idx], 1e-6);
    CHECK(close_rel(grad[idx], fd, 1e-4, 1e-8));
  }
}

TEST_CASE("ssim: backward matches finite differences") {
  Rng rng(47);
  Image a(13, 12, 1), b(13, 12, 1);
  for (auto& v : a.data) v = rng.uniform(0, 1);
  for (auto& v : b.data) v = rng.uniform(0, 1);
  Image grad(13, 12, 1);
  ssim_backward(a, b, 1.0, grad);
  Rng pick(53);
  for (int k = 0; k < 25; ++k) {
    const size_t idx = static_cast<size_t>(pick.uniform_index(static_cast<int64_t>(a.data.size())));
    const double fd = testutil::fd_slot([&] { return ssim_mean(a, b); }, &a.data[idx], 1e-6);
    CHECK(close_rel(grad.data[idx], fd, 1e-5, 1e-9));
  }
}
