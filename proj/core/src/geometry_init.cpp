#include "gssdf/geometry_init.hpp"

#include <cmath>
#include <numeric>

#include "gssdf/rasterizer.hpp"

namespace gssdf {

namespace {

Quat quat_from_frame(const Vec3& t_u, const Vec3& t_v, const Vec3& n) {
  Mat3 R;
  R.col(0) = t_u;
  R.col(1) = t_v;
  R.col(2) = n;
  Quat q(R);
  q.normalize();
  return q;
}

/// Any unit vector orthogonal to n.
Vec3 any_orthogonal(const Vec3& n) {
  const Vec3 axis = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(axis).normalized();
}

}  // namespace

GeometryInitResult init_splats_from_sdf(const SdfField& field, const GeometryInitConfig& cfg) {
  require(cfg.cell_size > 0, "init_splats_from_sdf: cell size must be positive");
  GeometryInitResult res;
  double cell = cfg.cell_size;
  res.mesh = marching_cubes(field, cell);
  // honor the splat budget by coarsening the initialization mesh
  while (cfg.max_init_splats > 0 && res.mesh.vertex_count() > cfg.max_init_splats) {
    cell *= 1.5;
    res.mesh = marching_cubes(field, cell);
  }
  res.cell_size_used = cell;
  const int64_t n = res.mesh.vertex_count();
  require(n >= 1, "init_splats_from_sdf: isosurface extraction produced no vertices");

  // batched field queries: value+gradient at vertices, gradients at the
  // Hessian probe points p +- h*n
  std::vector<double> pts(static_cast<size_t>(3 * n));
  for (int64_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a)
      pts[static_cast<size_t>(3 * i + a)] = res.mesh.vertices[static_cast<size_t>(i)][a];
  FieldQueryResult base;
  field.query_batch(pts.data(), n, true, base);

  const double h = cfg.hessian_step_factor * cell;
  std::vector<double> pts_pm(static_cast<size_t>(6 * n));
  std::vector<Vec3> normals(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Vec3 g(base.grad[static_cast<size_t>(3 * i)], base.grad[static_cast<size_t>(3 * i + 1)],
           base.grad[static_cast<size_t>(3 * i + 2)]);
    Vec3 nrm;
    if (g.norm() < 1e-8) {
      ++res.degenerate_frames;
      nrm = Vec3::UnitZ();
    } else {
      nrm = g.normalized();
    }
    normals[static_cast<size_t>(i)] = nrm;
    const Vec3 p = res.mesh.vertices[static_cast<size_t>(i)];
    for (int a = 0; a < 3; ++a) {
      pts_pm[static_cast<size_t>(3 * i + a)] = p[a] + h * nrm[a];
      pts_pm[static_cast<size_t>(3 * (n + i) + a)] = p[a] - h * nrm[a];
    }
  }
  FieldQueryResult probe;
  field.query_batch(pts_pm.data(), 2 * n, true, probe);

  res.splats.reserve(static_cast<size_t>(n));
  res.mesh.normals = normals;
  for (int64_t i = 0; i < n; ++i) {
    const Vec3 nrm = normals[static_cast<size_t>(i)];
    // curvature direction: Hessian-normal product by central differences
    Vec3 gp(probe.grad[static_cast<size_t>(3 * i)], probe.grad[static_cast<size_t>(3 * i + 1)],
            probe.grad[static_cast<size_t>(3 * i + 2)]);
    Vec3 gm(probe.grad[static_cast<size_t>(3 * (n + i))],
            probe.grad[static_cast<size_t>(3 * (n + i) + 1)],
            probe.grad[static_cast<size_t>(3 * (n + i) + 2)]);
    Vec3 b = (gp - gm) / (2.0 * h);
    Vec3 t_u;
    const Vec3 b_tangent = b - nrm.dot(b) * nrm;
    if (b.norm() < 1e-8 || b_tangent.norm() < 1e-8) {
      ++res.degenerate_frames;
      t_u = any_orthogonal(nrm);
    } else {
      t_u = b_tangent.normalized();
    }
    const Vec3 t_v = nrm.cross(t_u);

    SplatDisk s;
    s.p = res.mesh.vertices[static_cast<size_t>(i)];
    s.rot = quat_from_frame(t_u, t_v, nrm);
    s.s_u = s.s_v = cell;
    const double sdf = base.sdf[static_cast<size_t>(i)];
    const double beta = base.beta[static_cast<size_t>(i)];
    s.alpha = std::exp(-sdf * sdf / beta);
    s.sh.assign(static_cast<size_t>(3 * sh_basis_count(cfg.sh_degree)), 0.0);
    s.is_sky = false;
    res.splats.push_back(std::move(s));
  }
  return res;
}

std::vector<SplatDisk> init_sky(const Aabb& scene_bounds, const SkyInitConfig& cfg) {
  require(cfg.n_splats >= 1, "init_sky: need at least one splat");
  const double radius = cfg.radius_factor * scene_bounds.circumradius();
  const Vec3 center = scene_bounds.center();
  const int64_t n = cfg.n_splats;
  // twice the per-splat area share, as a 1-sigma disk
  const double area_per = 4.0 * M_PI * radius * radius / static_cast<double>(n);
  const double scale = std::sqrt(2.0 * area_per / M_PI);

  std::vector<SplatDisk> out;
  out.reserve(static_cast<size_t>(n));
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int64_t k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);

    SplatDisk s;
    s.p = center + radius * dir;
    const Vec3 nrm = -dir;  // inward
    const Vec3 t_u = any_orthogonal(nrm);
    const Vec3 t_v = nrm.cross(t_u);
    s.rot = quat_from_frame(t_u, t_v, nrm);
    s.s_u = s.s_v = scale;
    s.alpha = 1.0;  // logit storage caps this just below one
    s.sh.assign(static_cast<size_t>(3 * sh_basis_count(cfg.sh_degree)), 0.0);
    s.is_sky = true;
    out.push_back(std::move(s));
  }
  return out;
}

ColorPretrainReport color_pretrain(SplatScene& scene, const std::vector<CameraFrame>& views,
                                   const ColorPretrainConfig& cfg) {
  require(!views.empty(), "color_pretrain: empty dataset");
  require(scene.size() > 0, "color_pretrain: empty scene");
  ColorPretrainReport report;

  auto train_loss = [&] {
    double total = 0.0;
    for (const auto& view : views) total += loss_color(render(scene, view).color, view.image);
    return total / static_cast<double>(views.size());
  };
  report.loss_before = train_loss();

  AdamGroup sh_group({&scene.sh()}, {.lr = cfg.lr});
  Rng rng(derive_seed(cfg.seed, "color_pretrain"));
  std::vector<size_t> order(views.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t vi : order) {
      for (ParamTensor* p : scene.all_params()) p->zero_grad();
      Tape tape;
      auto nodes = render_op(tape, scene, views[vi]);
      ValueId loss = color_loss_op(tape, nodes, views[vi].image);
      tape.backward(loss);
      // only the color group steps; structural values never change here
      sh_group.step();
      ++report.steps;
    }
  }
  for (ParamTensor* p : scene.all_params()) p->zero_grad();
  report.loss_after = train_loss();
  return report;
}

}  // namespace gssdf
