#include "gssdf/ray_sampling.hpp"

#include <cmath>

namespace gssdf {

Aabb FlatRays::endpoint_bounds() const {
  Aabb box;
  for (size_t i = 0; i < dirs.size(); ++i) {
    box.expand(origins[i] + dist[i] * dirs[i]);
    box.expand(origins[i]);
  }
  return box;
}

FlatRays flatten(const LidarData& data) {
  FlatRays out;
  for (const auto& scan : data.scans) {
    for (size_t i = 0; i < scan.dirs.size(); ++i) {
      if (!scan.valid.empty() && !scan.valid[i]) continue;
      out.origins.push_back(scan.origin);
      out.dirs.push_back(scan.dirs[i]);
      out.dist.push_back(scan.dist[i]);
    }
  }
  return out;
}

RaySampleBatch sample_rays(const FlatRays& rays, const SdfField& field,
                           const RaySamplingConfig& cfg, Rng& rng) {
  require(rays.size() > 0, "sample_rays: empty scan");
  RaySampleBatch batch;
  const int n_rays = cfg.n_rays;
  batch.ray_origin.reserve(static_cast<size_t>(n_rays));
  batch.ray_dir.reserve(static_cast<size_t>(n_rays));
  batch.ray_dist.reserve(static_cast<size_t>(n_rays));

  const double tau = cfg.truncation;
  for (int r = 0; r < n_rays; ++r) {
    const int64_t pick = rng.uniform_index(rays.size());
    const Vec3 o = rays.origins[static_cast<size_t>(pick)];
    const Vec3 d = rays.dirs[static_cast<size_t>(pick)];
    const double t = rays.dist[static_cast<size_t>(pick)];
    require(std::abs(d.norm() - 1.0) < 1e-6, "sample_rays: ray direction not unit");
    batch.ray_origin.push_back(o);
    batch.ray_dir.push_back(d);
    batch.ray_dist.push_back(t);

    const bool has_free = t > tau + cfg.free_min;
    for (int k = 0; k < cfg.surface_samples; ++k) {
      const double ti = rng.uniform(t - tau, t + tau);
      batch.t_sample.push_back(ti);
      batch.ray_of.push_back(r);
    }
    if (has_free) {
      for (int k = 0; k < cfg.free_samples; ++k) {
        const double ti = rng.uniform(cfg.free_min, t - tau);
        batch.t_sample.push_back(ti);
        batch.ray_of.push_back(r);
      }
    }
  }

  const int64_t n = static_cast<int64_t>(batch.t_sample.size());
  batch.points.resize(static_cast<size_t>(3 * n));
  for (int64_t i = 0; i < n; ++i) {
    const int r = batch.ray_of[static_cast<size_t>(i)];
    const Vec3 p = batch.ray_origin[static_cast<size_t>(r)] +
                   batch.t_sample[static_cast<size_t>(i)] * batch.ray_dir[static_cast<size_t>(r)];
    batch.points[static_cast<size_t>(3 * i)] = p.x();
    batch.points[static_cast<size_t>(3 * i + 1)] = p.y();
    batch.points[static_cast<size_t>(3 * i + 2)] = p.z();
  }

  // Occupancy targets from the measured range and the field's current scale.
  FieldQueryResult q;
  field.query_batch(batch.points.data(), n, false, q);
  batch.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int r = batch.ray_of[static_cast<size_t>(i)];
    const double sbar = batch.ray_dist[static_cast<size_t>(r)] - batch.t_sample[static_cast<size_t>(i)];
    const double beta = q.beta[static_cast<size_t>(i)];
    double label = sigmoid(-sbar / beta);
    label = std::min(1.0 - 1e-7, std::max(1e-7, label));
    batch.labels[static_cast<size_t>(i)] = label;
  }
  return batch;
}

RaySampleBatch sample_rays(const LidarScan& scan, const SdfField& field,
                           const RaySamplingConfig& cfg, Rng& rng) {
  LidarData data;
  data.scans.push_back(scan);
  return sample_rays(flatten(data), field, cfg, rng);
}

namespace {

class OccupancyBceOp final : public TapeOp {
 public:
  OccupancyBceOp(FieldQueryNodes q, std::vector<double> labels, ValueId out)
      : q_(q), labels_(std::move(labels)), out_(out) {}
  const char* name() const override { return "occupancy_bce"; }

  void backward(Tape& tape) override {
    const double lbar = tape.grad(out_)[0];
    const auto& s = tape.value(q_.sdf);
    const auto& beta = tape.value(q_.beta);
    auto& sbar = tape.grad(q_.sdf);
    auto& bbar = tape.grad(q_.beta);
    for (size_t i = 0; i < labels_.size(); ++i) {
      const double o = sigmoid(-s[i] / beta[i]);
      if (o <= 1e-7 || o >= 1.0 - 1e-7) continue;  // clamped region, zero slope
      const double d_u = o - labels_[i];           // d(loss)/d(-s/beta)
      sbar[i] += lbar * d_u * (-1.0 / beta[i]);
      bbar[i] += lbar * d_u * (s[i] / (beta[i] * beta[i]));
    }
  }

 private:
  FieldQueryNodes q_;
  std::vector<double> labels_;
  ValueId out_;
};

class EikonalOp final : public TapeOp {
 public:
  EikonalOp(FieldQueryNodes q, ValueId out) : q_(q), out_(out) {}
  const char* name() const override { return "eikonal"; }

  void backward(Tape& tape) override {
    const double lbar = tape.grad(out_)[0];
    const auto& g = tape.value(q_.grad);
    auto& gbar = tape.grad(q_.grad);
    const int64_t n = q_.count;
    for (int64_t i = 0; i < n; ++i) {
      const double gx = g[static_cast<size_t>(3 * i)];
      const double gy = g[static_cast<size_t>(3 * i + 1)];
      const double gz = g[static_cast<size_t>(3 * i + 2)];
      const double gn = std::sqrt(gx * gx + gy * gy + gz * gz);
      if (gn < 1e-8) {
        // subgradient of magnitude 1 toward increasing norm, fixed axis
        gbar[static_cast<size_t>(3 * i)] += lbar * 2.0 * (0.0 - 1.0) * 1.0;
        continue;
      }
      const double c = lbar * 2.0 * (gn - 1.0) / gn;
      gbar[static_cast<size_t>(3 * i)] += c * gx;
      gbar[static_cast<size_t>(3 * i + 1)] += c * gy;
      gbar[static_cast<size_t>(3 * i + 2)] += c * gz;
    }
  }

 private:
  FieldQueryNodes q_;
  ValueId out_;
};

}  // namespace

ValueId occupancy_bce_op(Tape& tape, const FieldQueryNodes& q, std::vector<double> labels) {
  require(q.count == static_cast<int64_t>(labels.size()), "occupancy_bce: label count mismatch");
  require(!labels.empty(), "occupancy_bce: empty batch");
  const auto& s = tape.value(q.sdf);
  const auto& beta = tape.value(q.beta);
  double loss = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] > 0.0 && labels[i] < 1.0, "occupancy_bce: label outside (0,1)");
    const double u = -s[i] / beta[i];
    // log(o) and log(1-o) with the clamp applied, evaluated in log space
    const double log_o = std::max(-softplus(-u), std::log(1e-7));
    const double log_1mo = std::max(-softplus(u), std::log(1e-7));
    loss -= labels[i] * log_o + (1.0 - labels[i]) * log_1mo;
  }
  ValueId out = tape.alloc_value({loss});
  auto* op = tape.record<OccupancyBceOp>(q, std::move(labels), out);
  Tape::check_finite(tape.value(out), op->index, "occupancy_bce", "output");
  return out;
}

ValueId eikonal_op(Tape& tape, const FieldQueryNodes& q) {
  require(q.grad >= 0, "eikonal: query recorded without gradients");
  const auto& g = tape.value(q.grad);
  double loss = 0.0;
  for (int64_t i = 0; i < q.count; ++i) {
    const double gn = std::sqrt(sqr(g[static_cast<size_t>(3 * i)]) +
                                sqr(g[static_cast<size_t>(3 * i + 1)]) +
                                sqr(g[static_cast<size_t>(3 * i + 2)]));
    loss += sqr(gn - 1.0);
  }
  ValueId out = tape.alloc_value({loss});
  auto* op = tape.record<EikonalOp>(q, out);
  Tape::check_finite(tape.value(out), op->index, "eikonal", "output");
  return out;
}

double loss_bce(SdfField& field, const RaySampleBatch& batch) {
  Tape tape;
  auto q = field_query_op(tape, field, batch.points, false);
  return tape.scalar(occupancy_bce_op(tape, q, batch.labels));
}

double loss_eikonal(SdfField& field, const std::vector<double>& points) {
  Tape tape;
  auto q = field_query_op(tape, field, points, true);
  return tape.scalar(eikonal_op(tape, q));
}

}  // namespace gssdf
