#include "gssdf/synth_scene.hpp"

#include <cmath>

namespace gssdf {

namespace {

double box_sdf(const Vec3& p, const Vec3& center, const Vec3& half) {
  const Vec3 q = (p - center).cwiseAbs() - half;
  const Vec3 outside = q.cwiseMax(0.0);
  return outside.norm() + std::min(0.0, q.maxCoeff());
}

double primitive_sdf(const AnalyticScene::Primitive& prim, const Vec3& p) {
  using Type = AnalyticScene::Primitive::Type;
  switch (prim.type) {
    case Type::Sphere:
      return (p - prim.center).norm() - prim.radius;
    case Type::Box:
      return box_sdf(p, prim.center, prim.half_extent);
    case Type::InvertedBox:
      return -box_sdf(p, prim.center, prim.half_extent);
    case Type::Plane:
      return prim.normal.dot(p) - prim.offset;
  }
  return 1e30;
}

constexpr double kAmbient = 0.3;
constexpr double kDiffuse = 0.7;

}  // namespace

double AnalyticScene::sdf(const Vec3& p) const {
  double d = 1e30;
  for (const auto& prim : primitives) d = std::min(d, primitive_sdf(prim, p));
  return d;
}

double AnalyticScene::sdf_albedo(const Vec3& p, Vec3* albedo) const {
  double d = 1e30;
  for (const auto& prim : primitives) {
    const double pd = primitive_sdf(prim, p);
    if (pd < d) {
      d = pd;
      if (albedo) *albedo = prim.albedo;
    }
  }
  return d;
}

Vec3 AnalyticScene::normal_at(const Vec3& p) const {
  const double h = 1e-6;
  Vec3 n;
  for (int a = 0; a < 3; ++a) {
    Vec3 pp = p, pm = p;
    pp[a] += h;
    pm[a] -= h;
    n[a] = sdf(pp) - sdf(pm);
  }
  const double len = n.norm();
  return len > 1e-14 ? Vec3(n / len) : Vec3::UnitZ();
}

Vec3 AnalyticScene::shade(const Vec3& p, const Vec3& n) const {
  static const Vec3 light = Vec3(0.35, 0.25, 1.0).normalized();
  Vec3 albedo;
  sdf_albedo(p, &albedo);
  const double lambert = std::max(0.0, n.dot(light));
  return albedo * (kAmbient + kDiffuse * lambert);
}

AnalyticScene make_scene(const std::string& name) {
  using Prim = AnalyticScene::Primitive;
  AnalyticScene scene;
  scene.name = name;
  if (name == "sphere") {
    Prim s;
    s.type = Prim::Type::Sphere;
    s.center = Vec3::Zero();
    s.radius = 1.0;
    s.albedo = Vec3(0.75, 0.45, 0.3);
    scene.primitives.push_back(s);
    scene.bounds = {Vec3(-1.6, -1.6, -1.6), Vec3(1.6, 1.6, 1.6)};
  } else if (name == "box_room") {
    Prim room;
    room.type = Prim::Type::InvertedBox;
    room.center = Vec3(0, 0, 1.25);
    room.half_extent = Vec3(2.0, 2.0, 1.25);  // floor z=0, ceiling z=2.5
    room.albedo = Vec3(0.72, 0.7, 0.62);
    scene.primitives.push_back(room);
    Prim crate;
    crate.type = Prim::Type::Box;
    crate.center = Vec3(0.85, 0.55, 0.3);
    crate.half_extent = Vec3(0.32, 0.26, 0.3);
    crate.albedo = Vec3(0.7, 0.25, 0.2);
    scene.primitives.push_back(crate);
    Prim cabinet;
    cabinet.type = Prim::Type::Box;
    cabinet.center = Vec3(-0.75, -0.6, 0.42);
    cabinet.half_extent = Vec3(0.26, 0.3, 0.42);
    cabinet.albedo = Vec3(0.2, 0.35, 0.65);
    scene.primitives.push_back(cabinet);
    scene.bounds = {Vec3(-2.1, -2.1, -0.1), Vec3(2.1, 2.1, 2.6)};
  } else if (name == "street") {
    Prim ground;
    ground.type = Prim::Type::Plane;
    ground.normal = Vec3::UnitZ();
    ground.offset = 0.0;
    ground.albedo = Vec3(0.45, 0.45, 0.48);
    scene.primitives.push_back(ground);
    const Vec3 albedos[4] = {Vec3(0.7, 0.3, 0.25), Vec3(0.3, 0.55, 0.3), Vec3(0.3, 0.4, 0.7),
                             Vec3(0.65, 0.6, 0.3)};
    const Vec3 centers[4] = {Vec3(-2.4, 1.6, 0.5), Vec3(-0.5, -1.7, 0.7), Vec3(1.4, 1.5, 0.6),
                             Vec3(3.0, -1.4, 0.45)};
    const Vec3 halves[4] = {Vec3(0.6, 0.5, 0.5), Vec3(0.5, 0.4, 0.7), Vec3(0.7, 0.45, 0.6),
                            Vec3(0.5, 0.5, 0.45)};
    for (int k = 0; k < 4; ++k) {
      Prim b;
      b.type = Prim::Type::Box;
      b.center = centers[k];
      b.half_extent = halves[k];
      b.albedo = albedos[k];
      scene.primitives.push_back(b);
    }
    scene.bounds = {Vec3(-5.0, -3.0, -0.1), Vec3(5.0, 3.0, 2.6)};
  } else {
    fail("unknown scene '" + name + "'; available: sphere, box_room, street");
  }
  return scene;
}

std::vector<std::string> builtin_scene_names() { return {"sphere", "box_room", "street"}; }

}  // namespace gssdf
