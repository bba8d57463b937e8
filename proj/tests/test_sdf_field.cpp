#include <cmath>

#include "doctest.h"
#include "gssdf/ray_sampling.hpp"
#include "gssdf/sdf_field.hpp"
#include "testutil.hpp"

using namespace gssdf;
using testutil::close_rel;

namespace {
Aabb unit_bounds() { return {Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5)}; }

std::vector<double> random_points(Rng& rng, int n, const Aabb& box, double margin = 0.1) {
  std::vector<double> pts(static_cast<size_t>(3 * n));
  for (int i = 0; i < 3 * n; ++i) {
    const int a = i % 3;
    pts[static_cast<size_t>(i)] =
        rng.uniform(box.min[a] + margin, box.max[a] - margin);
  }
  return pts;
}
}  // namespace

TEST_CASE("hash grid config invariants") {
  HashGridConfig ok;
  ok.validate();
  HashGridConfig bad = ok;
  bad.levels = 8;  // 8 * 2 != 32
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.growth_factor = 1.0;  // resolutions stop increasing
  CHECK_THROWS(bad.validate());
}

TEST_CASE("freshly initialized field stays near zero") {
  SdfField field(testutil::tiny_field_config(unit_bounds()), 3);
  Rng rng(9);
  auto pts = random_points(rng, 1000, unit_bounds());
  FieldQueryResult r;
  field.query_batch(pts.data(), 1000, false, r);
  for (int i = 0; i < 1000; ++i) {
    CHECK(std::abs(r.sdf[static_cast<size_t>(i)]) < 1.0);
    CHECK(r.beta[static_cast<size_t>(i)] > 0.0);
  }
}

TEST_CASE("query: non-finite input throws, out-of-bounds clamps with flag") {
  SdfField field(testutil::tiny_field_config(unit_bounds()), 3);
  const double nanv = std::nan("");
  double bad[3] = {nanv, 0.0, 0.0};
  FieldQueryResult r;
  CHECK_THROWS(field.query_batch(bad, 1, false, r));
  bool clamped = false;
  field.query(Vec3(5.0, 0.0, 0.0), &clamped);
  CHECK(clamped);
  field.query(Vec3(0.2, 0.1, -0.3), &clamped);
  CHECK(!clamped);
}

TEST_CASE("query is deterministic and continuous") {
  SdfField field(testutil::tiny_field_config(unit_bounds()), 7);
  Rng rng(4);
  const auto pts = random_points(rng, 200, unit_bounds());
  FieldQueryResult a, b;
  field.query_batch(pts.data(), 200, true, a);
  field.query_batch(pts.data(), 200, true, b);
  CHECK(a.sdf == b.sdf);
  CHECK(a.grad == b.grad);

  //

  const double delta = 1e-4;
  for (int i = 0; i < 200; ++i) {
    const Vec3 x(pts[size_t(3 * i)], pts[size_t(3 * i + 1)], pts[size_t(3 * i + 2)]);
    const Vec3 x2 = x + Vec3(delta, -delta, delta) / std::sqrt(3.0);
    const double s1 = field.query(x).first;
    const double s2 = field.query(x2).first;
    CHECK(std::abs(s1 - s2) <= 100.0 * delta);
  }
}

TEST_CASE("exact linear field: value and gradient") {
  const Vec3 n = Vec3(0.0, 0.0, 1.0);
  SdfField field = testutil::make_linear_field(n, 0.0, unit_bounds());
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
    const auto [s, beta] = field.query(x);
    CHECK(s == doctest::Approx(x.z()).epsilon(1e-10));
    CHECK(beta == doctest::Approx(softplus(0.0) + 1e-3));
    bool degen = false;
    const Vec3 g = field.gradient(x, &degen);
    CHECK(!degen);
    CHECK((g - n).norm() < 1e-9);
  }
}

TEST_CASE("gradient matches finite differences at 100 random points") {
  const auto cfg = testutil::tiny_field_config(unit_bounds());
  SdfField field(cfg, 21);
  // salt the parameters so the field is non-trivial
  Rng salt(100);
  field.grid_tables().fill_normal(salt, 0.25);
  Rng rng(13);
  const double h = 1e-4;
  // central differences are only valid away from interpolation-cell faces
  std::vector<double> pts;
  while (pts.size() < 300) {
    Vec3 x(rng.uniform(-1.4, 1.4), rng.uniform(-1.4, 1.4), rng.uniform(-1.4, 1.4));
    if (!testutil::clear_of_grid_planes(cfg.grid, x, h)) continue;
    pts.insert(pts.end(), {x.x(), x.y(), x.z()});
  }
  const int n = static_cast<int>(pts.size() / 3);
  FieldQueryResult r;
  field.query_batch(pts.data(), n, true, r);
  int checked = 0;
  for (int i = 0; i < n; ++i) {
    Vec3 x(pts[size_t(3 * i)], pts[size_t(3 * i + 1)], pts[size_t(3 * i + 2)]);
    for (int a = 0; a < 3; ++a) {
      Vec3 xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      // The field is piecewise linear along each axis (trilinear cells +
      // ReLU), so a stencil clear of kinks has identical endpoint slopes;
      // anything else straddles a kink where central differences break down.
      const Vec3 gp = field.gradient(xp), gm = field.gradient(xm);
      if (std::abs(gp[a] - gm[a]) > 1e-9 * (std::abs(gp[a]) + 1e-3)) continue;
      const double fd = (field.query(xp).first - field.query(xm).first) / (2 * h);
      const double an = r.grad[static_cast<size_t>(3 * i + a)];
      if (std::abs(fd) < 1e-6 && std::abs(an) < 1e-6) continue;
      CHECK(close_rel(an, fd, 1e-3, 1e-6));
      ++checked;
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("parameter gradients match finite differences (value, scale, spatial-grad paths)") {
  SdfField field(testutil::tiny_field_config(unit_bounds(), 8, 2), 17);
  Rng salt(23);
  field.grid_tables().fill_normal(salt, 0.05);
  Rng rng(29);
  const int n = 12;
  auto pts = random_points(rng, n, unit_bounds());

  // adjoints fixed ahead of time
  std::vector<double> sbar(n), bbar(n), gbar(3 * n);
  for (auto& v : sbar) v = rng.uniform(-1, 1);
  for (auto& v : bbar) v = rng.uniform(-1, 1);
  for (auto& v : gbar) v = rng.uniform(-1, 1);

  auto objective = [&] {
    FieldQueryResult r;
    field.query_batch(pts.data(), n, true, r);
    double L = 0.0;
    for (int i = 0; i < n; ++i) {
      L += sbar[size_t(i)] * r.sdf[size_t(i)] + bbar[size_t(i)] * r.beta[size_t(i)];
      for (int a = 0; a < 3; ++a) L += gbar[size_t(3 * i + a)] * r.grad[size_t(3 * i + a)];
    }
    return L;
  };

  for (ParamTensor* p : field.params()) p->zero_grad();
  field.query_backward(pts.data(), n, sbar.data(), bbar.data(), gbar.data());

  Rng probe_rng(31);
  auto params = field.params();
  for (ParamTensor* p : params) {
    const int n_probe = p->size() > 40 ? 25 : static_cast<int>(p->size());
    for (int k = 0; k < n_probe; ++k) {
      const int64_t idx = p->size() > 40 ? probe_rng.uniform_index(p->size()) : k;
      const double fd =
          testutil::fd_slot(objective, &p->data()[idx], 1e-5);
      const double an = p->grad()[idx];
      if (std::abs(fd) < 1e-7 && std::abs(an) < 1e-7) continue;
      CHECK(close_rel(an, fd, 2e-4, 1e-6));
    }
  }
}

TEST_CASE("sample_rays: interval membership and surface-only edge case") {
  SdfField field(testutil::tiny_field_config({Vec3(-1, -1, -1), Vec3(9, 9, 9)}), 5);
  LidarScan scan;
  scan.origin = Vec3::Zero();
  scan.dirs = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  scan.dist = {5.0, 0.15};  // second ray shorter than tau + eps
  scan.valid = {1, 1};
  RaySamplingConfig cfg;
  cfg.n_rays = 64;
  cfg.truncation = 0.2;
  cfg.free_min = 0.05;
  Rng rng(3);
  const auto batch = sample_rays(scan, field, cfg, rng);
  for (int64_t i = 0; i < batch.count(); ++i) {
    const int r = batch.ray_of[static_cast<size_t>(i)];
    const double t = batch.ray_dist[static_cast<size_t>(r)];
    const double ti = batch.t_sample[static_cast<size_t>(i)];
    if (t == 5.0) {
      const bool surface = ti >= 4.8 && ti <= 5.2;
      const bool free = ti >= 0.05 && ti < 4.8;
      CHECK((surface || free));
    } else {
      CHECK(ti >= t - 0.2);  // short ray: surface band only
      CHECK(ti <= t + 0.2);
    }
  }
}

TEST_CASE("sample_rays: label semantics") {
  SdfField field(testutil::tiny_field_config({Vec3(-1, -1, -1), Vec3(9, 9, 9)}), 5);
  // Label at t_i = t must be exactly 0.5; labels increase with t_i.
  const double beta = field.query(Vec3(2, 0, 0)).second;
  CHECK(scaled_sigmoid(0.0, beta) == doctest::Approx(0.5));
  double prev = 0.0;
  for (double ti = 1.0; ti < 3.0; ti += 0.1) {
    const double label = sigmoid((ti - 2.0) / beta);
    CHECK(label > prev);
    prev = label;
  }
  // Phi symmetry
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-3, 3), h = rng.uniform(0.01, 2.0);
    CHECK(scaled_sigmoid(v, h) > 0.0);
    CHECK(scaled_sigmoid(v, h) < 1.0);
    CHECK(scaled_sigmoid(-v, h) == doctest::Approx(1.0 - scaled_sigmoid(v, h)).epsilon(1e-12));
  }
}

TEST_CASE("loss_bce: entropy floor and gradient check") {
  SdfField field(testutil::tiny_field_config(unit_bounds(), 8, 2), 19);
  Rng salt(41);
  field.grid_tables().fill_normal(salt, 0.02);

  // fresh field predicts ~0.5 everywhere; 0.5 labels give ln 2 per sample
  RaySampleBatch batch;
  batch.points = {0.1, 0.2, 0.3, -0.2, 0.1, 0.4};
  batch.labels = {0.5, 0.5};
  const double loss = loss_bce(field, batch);
  // prediction is sigmoid(-s/beta) with s tiny but nonzero; near ln2
  CHECK(loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-3));

  // entropy lower bound: loss >= sum of label entropies, equality iff o == label
  auto entropy = [](double p) { return -(p * std::log(p) + (1 - p) * std::log(1 - p)); };
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const double label = rng.uniform(0.05, 0.95);
    RaySampleBatch b2;
    b2.points = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    b2.labels = {label};
    CHECK(loss_bce(field, b2) >= entropy(label) - 1e-12);
  }

  // gradient vs finite differences on a 2-sample batch
  Tape tape;
  auto q = field_query_op(tape, field, batch.points, false);
  ValueId loss_id = occupancy_bce_op(tape, q, batch.labels);
  for (ParamTensor* p : field.params()) p->zero_grad();
  tape.backward(loss_id);

  auto objective = [&] { return loss_bce(field, batch); };
  Rng probe(55);
  for (ParamTensor* p : field.params()) {
    for (int k = 0; k < std::min<int64_t>(10, p->size()); ++k) {
      const int64_t idx = p->size() > 10 ? probe.uniform_index(p->size()) : k;
      const double fd = testutil::fd_slot(objective, &p->data()[idx], 1e-6);
      const double an = p->grad()[idx];
      if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
      CHECK(close_rel(an, fd, 1e-5, 1e-8));
    }
  }
}

TEST_CASE("loss_bce: empty batch errors") {
  SdfField field(testutil::tiny_field_config(unit_bounds()), 2);
  RaySampleBatch batch;
  CHECK_THROWS(loss_bce(field, batch));
}

TEST_CASE("loss_eikonal: exact values on constructed fields") {
  const Aabb box = unit_bounds();
  {
    SdfField unit_field = testutil::make_linear_field(Vec3(0, 0, 1), 0.1, box);
    std::vector<double> pts = {0.2, 0.1, -0.3, -0.5, 0.4, 0.8};
    CHECK(loss_eikonal(unit_field, pts) == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    // doubling the field makes each contribution (2 - 1)^2 = 1
    SdfField scaled = testutil::make_linear_field(Vec3(0, 0, 2), 0.0, box);
    std::vector<double> pts = {0.2, 0.1, -0.3, -0.5, 0.4, 0.8};
    CHECK(loss_eikonal(scaled, pts) == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("loss_eikonal: parameter gradient matches finite differences") {
  SdfField field(testutil::tiny_field_config(unit_bounds(), 8, 2), 61);
  Rng salt(77);
  field.grid_tables().fill_normal(salt, 0.05);
  std::vector<double> pts;
  Rng rng(83);
  for (int i = 0; i < 18; ++i) pts.push_back(rng.uniform(-1.2, 1.2));

  Tape tape;
  auto q = field_query_op(tape, field, pts, true);
  ValueId loss_id = eikonal_op(tape, q);
  for (ParamTensor* p : field.params()) p->zero_grad();
  tape.backward(loss_id);

  auto objective = [&] { return loss_eikonal(field, pts); };
  Rng probe(91);
  for (ParamTensor* p : field.params()) {
    for (int k = 0; k < std::min<int64_t>(8, p->size()); ++k) {
      const int64_t idx = p->size() > 8 ? probe.uniform_index(p->size()) : k;
      const double fd = testutil::fd_slot(objective, &p->data()[idx], 1e-5);
      const double an = p->grad()[idx];
      if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
      CHECK(close_rel(an, fd, 1e-4, 1e-7));
    }
  }
}

TEST_CASE("field save/load round trip") {
  SdfField field(testutil::tiny_field_config(unit_bounds()), 97);
  std::stringstream ss;
  field.save(ss);
  SdfField loaded = SdfField::load(ss);
  Rng rng(15);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK(field.query(x).first == loaded.query(x).first);
    CHECK(field.query(x).second == loaded.query(x).second);
  }
}
