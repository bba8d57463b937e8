#include "gssdf/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "gssdf/parallel.hpp"
#include "gssdf/ssim.hpp"

namespace gssdf {

bool intersect_disk(const Vec3& ray_o, const Vec3& ray_d, const Vec3& p, const Vec3& t_u,
                    const Vec3& t_v, const Vec3& n, double s_u, double s_v, double& u, double& v,
                    double& t_star) {
  const double den = ray_d.dot(n);
  if (std::abs(den) < 1e-9) return false;
  const Vec3 m = p - ray_o;
  t_star = m.dot(n) / den;
  if (t_star <= 0.0) return false;
  const Vec3 delta = t_star * ray_d - m;  // hit - p
  u = delta.dot(t_u) / s_u;
  v = delta.dot(t_v) / s_v;
  return true;
}

namespace {

struct PreparedSplat {
  Vec3 p;
  Mat3 R;  // columns [t_u, t_v, n]
  double s_u, s_v, alpha;
};

struct Contribution {
  int32_t splat;
  double u, v, kernel, t_star;
};

constexpr double kDepthEps = 1e-6;  // alpha floor in the depth normalization

std::vector<PreparedSplat> prepare_splats(const SplatScene& scene) {
  const int64_t n = scene.size();
  std::vector<PreparedSplat> out(static_cast<size_t>(n));
  const double* pos = scene.positions().data();
  const double* rot = scene.rotations().data();
  const double* ls = scene.log_scales().data();
  const double* op = scene.opacity_logits().data();
  for (int64_t i = 0; i < n; ++i) {
    PreparedSplat& s = out[static_cast<size_t>(i)];
    s.p = Vec3(pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]);
    s.R = rotation_from_quat(rot + 4 * i);
    s.s_u = std::exp(ls[2 * i]);
    s.s_v = std::exp(ls[2 * i + 1]);
    s.alpha = sigmoid(op[i]);
  }
  return out;
}

/// Conservative per-tile bins from the camera-space bounding sphere of the
/// kernel cutoff disk. Correctness never depends on the bins: every splat
/// whose kernel can reach a pixel lands in that pixel's tile list.
struct TileBins {
  int tiles_x = 0, tiles_y = 0, tile = 16;
  std::vector<std::vector<int32_t>> lists;
};

TileBins bin_splats(const std::vector<PreparedSplat>& splats, const CameraFrame& cam,
                    const RenderConfig& cfg) {
  TileBins bins;
  bins.tile = cfg.tile;
  bins.tiles_x = (cam.intr.width + cfg.tile - 1) / cfg.tile;
  bins.tiles_y = (cam.intr.height + cfg.tile - 1) / cfg.tile;
  bins.lists.assign(static_cast<size_t>(bins.tiles_x) * bins.tiles_y, {});
  const double r_cut = std::sqrt(-2.0 * std::log(cfg.kernel_min)) + 1e-6;

  for (size_t i = 0; i < splats.size(); ++i) {
    const PreparedSplat& s = splats[i];
    const Vec3 pc = cam.world_to_cam(s.p);
    const double rs = r_cut * std::max(s.s_u, s.s_v);
    if (pc.z() + rs <= cfg.near_clip) continue;  // wholly behind the camera

    // project the 8 corners of the camera-space AABB of the bounding sphere
    double px_min = 1e30, px_max = -1e30, py_min = 1e30, py_max = -1e30;
    for (int corner = 0; corner < 8; ++corner) {
      const double x = pc.x() + ((corner & 1) ? rs : -rs);
      const double y = pc.y() + ((corner & 2) ? rs : -rs);
      const double z = std::max(cfg.near_clip, pc.z() + ((corner & 4) ? rs : -rs));
      const double px = cam.intr.fx * x / z + cam.intr.cx;
      const double py = cam.intr.fy * y / z + cam.intr.cy;
      px_min = std::min(px_min, px);
      px_max = std::max(px_max, px);
      py_min = std::min(py_min, py);
      py_max = std::max(py_max, py);
    }
    const int tx0 = std::max(0, static_cast<int>(std::floor(px_min)) / cfg.tile);
    const int tx1 = std::min(bins.tiles_x - 1, static_cast<int>(std::floor(px_max)) / cfg.tile);
    const int ty0 = std::max(0, static_cast<int>(std::floor(py_min)) / cfg.tile);
    const int ty1 = std::min(bins.tiles_y - 1, static_cast<int>(std::floor(py_max)) / cfg.tile);
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        bins.lists[static_cast<size_t>(ty) * bins.tiles_x + tx].push_back(
            static_cast<int32_t>(i));
  }
  return bins;
}

/// Candidate contributions for one pixel, depth-sorted.
void collect_pixel(const std::vector<PreparedSplat>& splats,
                   std::span<const int32_t> candidates, const Vec3& ray_o, const Vec3& ray_d,
                   const RenderConfig& cfg, std::vector<Contribution>& out) {
  out.clear();
  for (int32_t idx : candidates) {
    const PreparedSplat& s = splats[static_cast<size_t>(idx)];
    double u, v, t_star;
    if (!intersect_disk(ray_o, ray_d, s.p, s.R.col(0), s.R.col(1), s.R.col(2), s.s_u, s.s_v, u,
                        v, t_star))
      continue;
    if (t_star <= cfg.near_clip) continue;
    const double g = disk_kernel(u, v);
    if (g < cfg.kernel_min) continue;
    out.push_back({idx, u, v, g, t_star});
  }
  std::sort(out.begin(), out.end(), [](const Contribution& a, const Contribution& b) {
    return a.t_star != b.t_star ? a.t_star < b.t_star : a.splat < b.splat;
  });
}

struct PixelAccum {
  Vec3 color = Vec3::Zero();
  double depth_raw = 0.0;
  Vec3 normal = Vec3::Zero();
  double alpha = 0.0;
};

/// Front-to-back compositing; returns the number of consumed contributions.
template <typename PerContribution>
int composite(const std::vector<PreparedSplat>& splats,
              const std::vector<Contribution>& contribs, const RenderConfig& cfg,
              PixelAccum& acc, PerContribution&& per_contribution) {
  double transmittance = 1.0;
  int consumed = 0;
  for (const Contribution& c : contribs) {
    if (transmittance < cfg.transmittance_min) break;
    const PreparedSplat& s = splats[static_cast<size_t>(c.splat)];
    const double sigma = s.alpha * c.kernel;
    const double w = sigma * transmittance;
    per_contribution(c, w, transmittance);
    transmittance *= (1.0 - sigma);
    ++consumed;
  }
  (void)acc;
  return consumed;
}

struct ForwardImages {
  Image color, depth, normal, alpha;
};

}  // namespace

// ---------------------------------------------------------------------------
// Shared forward pass
// ---------------------------------------------------------------------------

namespace {

struct ForwardResult {
  ForwardImages images;
  std::vector<double> splat_weights;
  // per-pixel candidate lists (kept only when recording for backward)
  std::vector<std::vector<Contribution>> contribs;
  bool recorded = false;
};

ForwardResult forward_pass(const SplatScene& scene, const CameraFrame& cam,
                           const RenderConfig& cfg, bool record) {
  cam.validate();
  const int W = cam.intr.width, H = cam.intr.height;
  ForwardResult res;
  res.images.color = Image(W, H, 3);
  res.images.depth = Image(W, H, 1);
  res.images.normal = Image(W, H, 3);
  res.images.alpha = Image(W, H, 1);
  res.splat_weights.assign(static_cast<size_t>(scene.size()), 0.0);
  res.recorded = record;
  if (record) res.contribs.resize(static_cast<size_t>(W) * H);

  const auto splats = prepare_splats(scene);
  TileBins bins;
  std::vector<int32_t> all;
  if (cfg.brute_force) {
    all.resize(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) all[i] = static_cast<int32_t>(i);
  } else {
    bins = bin_splats(splats, cam, cfg);
  }

  const int tiles_x = cfg.brute_force ? (W + cfg.tile - 1) / cfg.tile : bins.tiles_x;
  const int tiles_y = cfg.brute_force ? (H + cfg.tile - 1) / cfg.tile : bins.tiles_y;
  const int64_t n_tiles = static_cast<int64_t>(tiles_x) * tiles_y;
  const Vec3 origin = cam.center();
  const int slots = parallel_slot_count();
  std::vector<std::vector<double>> slot_weights(
      static_cast<size_t>(slots), std::vector<double>(static_cast<size_t>(scene.size()), 0.0));

  parallel_chunks(n_tiles, 1, [&](int64_t t0, int64_t t1, int slot) {
    std::vector<Contribution> scratch;
    for (int64_t t = t0; t < t1; ++t) {
      const int tx = static_cast<int>(t % tiles_x), ty = static_cast<int>(t / tiles_x);
      std::span<const int32_t> candidates =
          cfg.brute_force ? std::span<const int32_t>(all)
                          : std::span<const int32_t>(bins.lists[static_cast<size_t>(t)]);
      for (int j = ty * cfg.tile; j < std::min(H, (ty + 1) * cfg.tile); ++j) {
        for (int i = tx * cfg.tile; i < std::min(W, (tx + 1) * cfg.tile); ++i) {
          const Vec3 ray_d = cam.pixel_dir_world(i, j);
          const double rz = (cam.rot_wc.transpose() * ray_d).z();
          collect_pixel(splats, candidates, origin, ray_d, cfg, scratch);
          PixelAccum acc;
          composite(splats, scratch, cfg, acc,
                    [&](const Contribution& c, double w, double /*T*/) {
                      const PreparedSplat& s = splats[static_cast<size_t>(c.splat)];
                      const Vec3 color = sh_color(scene.sh_coeffs(c.splat), scene.sh_degree(), ray_d);
                      const Vec3 n_face =
                          s.R.col(2).dot(ray_d) > 0.0 ? Vec3(-s.R.col(2)) : Vec3(s.R.col(2));
                      acc.color += w * color;
                      acc.depth_raw += w * c.t_star * rz;
                      acc.normal += w * n_face;
                      acc.alpha += w;
                      slot_weights[static_cast<size_t>(slot)][static_cast<size_t>(c.splat)] += w;
                    });
          for (int ch = 0; ch < 3; ++ch) {
            res.images.color.at(i, j, ch) = acc.color[ch];
            res.images.normal.at(i, j, ch) = acc.normal[ch];
          }
          res.images.alpha.at(i, j) = acc.alpha;
          res.images.depth.at(i, j) = acc.depth_raw / std::max(acc.alpha, kDepthEps);
          if (record) res.contribs[static_cast<size_t>(j) * W + i] = scratch;
        }
      }
    }
  });

  for (const auto& sw : slot_weights)
    for (size_t i = 0; i < sw.size(); ++i) res.splat_weights[i] += sw[i];
  return res;
}

}  // namespace

RenderOutput render(const SplatScene& scene, const CameraFrame& cam, const RenderConfig& cfg) {
  ForwardResult res = forward_pass(scene, cam, cfg, false);
  RenderOutput out;
  out.color = std::move(res.images.color);
  out.depth = std::move(res.images.depth);
  out.normal = std::move(res.images.normal);
  out.alpha = std::move(res.images.alpha);
  out.splat_weights = std::move(res.splat_weights);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable op
// ---------------------------------------------------------------------------

namespace {

class RenderBackwardOp final : public TapeOp {
 public:
  RenderBackwardOp(SplatScene& scene, const CameraFrame& cam, RenderConfig cfg,
                   std::vector<PreparedSplat> splats,
                   std::vector<std::vector<Contribution>> contribs, RenderNodes nodes)
      : scene_(scene),
        cam_(cam),
        cfg_(cfg),
        splats_(std::move(splats)),
        contribs_(std::move(contribs)),
        nodes_(nodes) {}

  const char* name() const override { return "render"; }

  void backward(Tape& tape) override {
    const int W = cam_.intr.width, H = cam_.intr.height;
    const auto& c_adj = tape.grad(nodes_.color);
    const auto& d_adj = tape.grad(nodes_.depth);
    const auto& n_adj_img = tape.grad(nodes_.normal);
    const auto& a_adj = tape.grad(nodes_.alpha);
    Tape::check_finite(c_adj, index, name(), "color adjoint");
    Tape::check_finite(d_adj, index, name(), "depth adjoint");
    Tape::check_finite(n_adj_img, index, name(), "normal adjoint");
    Tape::check_finite(a_adj, index, name(), "alpha adjoint");
    const auto& alpha_img = tape.value(nodes_.alpha);
    const auto& depth_img = tape.value(nodes_.depth);

    const int64_t n = scene_.size();
    const int n_sh = scene_.sh_coeff_count();
    const int slots = parallel_slot_count();
    struct SlotBuf {
      std::vector<double> dp, dR, dls, dlogit, dsh, max_kernel;
    };
    std::vector<SlotBuf> bufs(static_cast<size_t>(slots));
    for (auto& b : bufs) {
      b.dp.assign(static_cast<size_t>(3 * n), 0.0);
      b.dR.assign(static_cast<size_t>(9 * n), 0.0);
      b.dls.assign(static_cast<size_t>(2 * n), 0.0);
      b.dlogit.assign(static_cast<size_t>(n), 0.0);
      b.dsh.assign(static_cast<size_t>(n_sh * n), 0.0);
      b.max_kernel.assign(static_cast<size_t>(n), 0.0);
    }

    const int tile = cfg_.tile;
    const int tiles_x = (W + tile - 1) / tile, tiles_y = (H + tile - 1) / tile;
    const Vec3 origin = cam_.center();
    const int basis_n = sh_basis_count(scene_.sh_degree());

    parallel_chunks(static_cast<int64_t>(tiles_x) * tiles_y, 1, [&](int64_t t0, int64_t t1,
                                                                    int slot) {
      SlotBuf& buf = bufs[static_cast<size_t>(slot)];
      std::vector<double> w_seq, s_seq;
      for (int64_t t = t0; t < t1; ++t) {
        const int tx = static_cast<int>(t % tiles_x), ty = static_cast<int>(t / tiles_x);
        for (int j = ty * tile; j < std::min(H, (ty + 1) * tile); ++j) {
          for (int i = tx * tile; i < std::min(W, (tx + 1) * tile); ++i) {
            const size_t pix = static_cast<size_t>(j) * W + i;
            const auto& contribs = contribs_[pix];
            if (contribs.empty()) continue;

            const Vec3 ray_d = cam_.pixel_dir_world(i, j);
            const double rz = (cam_.rot_wc.transpose() * ray_d).z();
            double basis[16];
            sh_eval_basis(scene_.sh_degree(), ray_d, basis);

            const Vec3 chat(c_adj[3 * pix], c_adj[3 * pix + 1], c_adj[3 * pix + 2]);
            const Vec3 nhat(n_adj_img[3 * pix], n_adj_img[3 * pix + 1], n_adj_img[3 * pix + 2]);
            const double A = alpha_img[pix];
            const double denom = std::max(A, kDepthEps);
            const double dhat_raw = d_adj[pix] / denom;
            const double ahat_tot =
                a_adj[pix] - (A > kDepthEps ? depth_img[pix] * d_adj[pix] / denom : 0.0);

            // replay weights and collect per-contribution loss sensitivities
            w_seq.clear();
            s_seq.clear();
            double transmittance = 1.0;
            std::vector<double> t_seq;
            t_seq.clear();
            int consumed = 0;
            for (const Contribution& c : contribs) {
              if (transmittance < cfg_.transmittance_min) break;
              const PreparedSplat& s = splats_[static_cast<size_t>(c.splat)];
              const double sigma = s.alpha * c.kernel;
              t_seq.push_back(transmittance);
              w_seq.push_back(sigma * transmittance);

              const double* coeffs = scene_.sh().data() + static_cast<int64_t>(n_sh) * c.splat;
              Vec3 c_raw = Vec3::Zero();
              for (int b = 0; b < basis_n; ++b)
                for (int ch = 0; ch < 3; ++ch) c_raw[ch] += coeffs[3 * b + ch] * basis[b];
              c_raw.array() += 0.5;
              const Vec3 color = c_raw.cwiseMax(0.0);
              const double flip = s.R.col(2).dot(ray_d) > 0.0 ? -1.0 : 1.0;
              const Vec3 n_face = flip * s.R.col(2);
              s_seq.push_back(chat.dot(color) + dhat_raw * c.t_star * rz + nhat.dot(n_face) +
                              ahat_tot);
              transmittance *= (1.0 - sigma);
              ++consumed;
            }

            // suffix scan for the transmittance coupling
            double suffix = 0.0;
            for (int k = consumed - 1; k >= 0; --k) {
              const Contribution& c = contribs[static_cast<size_t>(k)];
              const PreparedSplat& s = splats_[static_cast<size_t>(c.splat)];
              const double sigma = s.alpha * c.kernel;
              const double w = w_seq[static_cast<size_t>(k)];
              const double d_sigma =
                  t_seq[static_cast<size_t>(k)] * s_seq[static_cast<size_t>(k)] -
                  suffix / std::max(1.0 - sigma, 1e-12);
              suffix += w * s_seq[static_cast<size_t>(k)];

              const int64_t id = c.splat;
              buf.max_kernel[static_cast<size_t>(id)] =
                  std::max(buf.max_kernel[static_cast<size_t>(id)], c.kernel);

              // opacity and kernel
              const double d_alpha = d_sigma * c.kernel;
              buf.dlogit[static_cast<size_t>(id)] += d_alpha * s.alpha * (1.0 - s.alpha);
              const double d_kernel = d_sigma * s.alpha;
              const double du = -c.u * c.kernel * d_kernel;
              const double dv = -c.v * c.kernel * d_kernel;

              // value paths
              const double* coeffs = scene_.sh().data() + static_cast<int64_t>(n_sh) * id;
              Vec3 c_raw = Vec3::Zero();
              for (int b = 0; b < basis_n; ++b)
                for (int ch = 0; ch < 3; ++ch) c_raw[ch] += coeffs[3 * b + ch] * basis[b];
              c_raw.array() += 0.5;
              for (int b = 0; b < basis_n; ++b)
                for (int ch = 0; ch < 3; ++ch)
                  if (c_raw[ch] > 0.0)
                    buf.dsh[static_cast<size_t>(n_sh * id + 3 * b + ch)] +=
                        w * chat[ch] * basis[b];

              const double flip = s.R.col(2).dot(ray_d) > 0.0 ? -1.0 : 1.0;
              Vec3 n_accum = flip * w * nhat;  // normal-image path
              const double dt_depth = w * dhat_raw * rz;

              // geometry chain
              const Vec3 t_u = s.R.col(0), t_v = s.R.col(1), nrm = s.R.col(2);
              const double den = ray_d.dot(nrm);
              const Vec3 m = s.p - origin;
              const Vec3 delta = c.t_star * ray_d - m;
              const double tur = t_u.dot(ray_d), tvr = t_v.dot(ray_d);

              Vec3 tu_adj = du * delta / s.s_u;
              Vec3 tv_adj = dv * delta / s.s_v;
              const double coef = du * tur / s.s_u + dv * tvr / s.s_v + dt_depth;
              n_accum += -coef / den * delta;
              const Vec3 p_adj = du * ((tur / (s.s_u * den)) * nrm - t_u / s.s_u) +
                                 dv * ((tvr / (s.s_v * den)) * nrm - t_v / s.s_v) +
                                 dt_depth / den * nrm;

              for (int a = 0; a < 3; ++a) {
                buf.dp[static_cast<size_t>(3 * id + a)] += p_adj[a];
                buf.dR[static_cast<size_t>(9 * id + 3 * a + 0)] += tu_adj[a];
                buf.dR[static_cast<size_t>(9 * id + 3 * a + 1)] += tv_adj[a];
                buf.dR[static_cast<size_t>(9 * id + 3 * a + 2)] += n_accum[a];
              }
              buf.dls[static_cast<size_t>(2 * id)] += -du * c.u;
              buf.dls[static_cast<size_t>(2 * id + 1)] += -dv * c.v;
            }
          }
        }
      }
    });

    // deterministic slot merge into tensor grads + densify stats
    auto& stats = scene_.stats();
    stats.ensure(n);
    double* pg = scene_.positions().grad();
    double* rg = scene_.rotations().grad();
    double* lsg = scene_.log_scales().grad();
    double* og = scene_.opacity_logits().grad();
    double* shg = scene_.sh().grad();

    std::vector<double> dp(static_cast<size_t>(3 * n), 0.0);
    std::vector<double> dR(static_cast<size_t>(9 * n), 0.0);
    for (const auto& b : bufs) {
      for (int64_t k = 0; k < 3 * n; ++k) dp[static_cast<size_t>(k)] += b.dp[static_cast<size_t>(k)];
      for (int64_t k = 0; k < 9 * n; ++k) dR[static_cast<size_t>(k)] += b.dR[static_cast<size_t>(k)];
      for (int64_t k = 0; k < 2 * n; ++k) lsg[k] += b.dls[static_cast<size_t>(k)];
      for (int64_t k = 0; k < n; ++k) og[k] += b.dlogit[static_cast<size_t>(k)];
      for (int64_t k = 0; k < static_cast<int64_t>(n_sh) * n; ++k)
        shg[k] += b.dsh[static_cast<size_t>(k)];
      for (int64_t k = 0; k < n; ++k)
        stats.max_kernel[static_cast<size_t>(k)] =
            std::max(stats.max_kernel[static_cast<size_t>(k)], b.max_kernel[static_cast<size_t>(k)]);
    }
    for (int64_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) pg[3 * i + a] += dp[static_cast<size_t>(3 * i + a)];
      Mat3 r_adj;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) r_adj(r, c) = dR[static_cast<size_t>(9 * i + 3 * r + c)];
      rotation_backward(scene_.rotations().data() + 4 * i, r_adj, rg + 4 * i);

      // view-space positional gradient statistic for densification
      if (nodes_.splat_weights[static_cast<size_t>(i)] > 0.0) {
        const Vec3 g_world(dp[static_cast<size_t>(3 * i)], dp[static_cast<size_t>(3 * i + 1)],
                           dp[static_cast<size_t>(3 * i + 2)]);
        const Vec3 g_cam = cam_.rot_wc.transpose() * g_world;
        const double z = std::max(cam_.world_to_cam(splats_[static_cast<size_t>(i)].p).z(),
                                  cfg_.near_clip);
        const double gx = z / cam_.intr.fx * g_cam.x();
        const double gy = z / cam_.intr.fy * g_cam.y();
        stats.pos_grad_norm_sum[static_cast<size_t>(i)] += std::sqrt(gx * gx + gy * gy);
        stats.pos_grad_count[static_cast<size_t>(i)] += 1;
      }
    }
  }

 private:
  SplatScene& scene_;
  CameraFrame cam_;
  RenderConfig cfg_;
  std::vector<PreparedSplat> splats_;
  std::vector<std::vector<Contribution>> contribs_;
  RenderNodes nodes_;
};

}  // namespace

RenderNodes render_op(Tape& tape, SplatScene& scene, const CameraFrame& cam,
                      const RenderConfig& cfg) {
  ForwardResult res = forward_pass(scene, cam, cfg, true);
  RenderNodes nodes;
  nodes.width = cam.intr.width;
  nodes.height = cam.intr.height;
  nodes.color = tape.alloc_value(std::move(res.images.color.data));
  nodes.depth = tape.alloc_value(std::move(res.images.depth.data));
  nodes.normal = tape.alloc_value(std::move(res.images.normal.data));
  nodes.alpha = tape.alloc_value(std::move(res.images.alpha.data));
  nodes.splat_weights = std::move(res.splat_weights);
  auto* op = tape.record<RenderBackwardOp>(scene, cam, cfg, prepare_splats(scene),
                                           std::move(res.contribs), nodes);
  Tape::check_finite(tape.value(nodes.color), op->index, "render", "color output");
  Tape::check_finite(tape.value(nodes.depth), op->index, "render", "depth output");
  Tape::check_finite(tape.value(nodes.normal), op->index, "render", "normal output");
  Tape::check_finite(tape.value(nodes.alpha), op->index, "render", "alpha output");
  return nodes;
}

// ---------------------------------------------------------------------------
// Photometric loss
// ---------------------------------------------------------------------------

double loss_color(const Image& rendered, const Image& gt) {
  require(rendered.width == gt.width && rendered.height == gt.height &&
              rendered.channels == gt.channels,
          "loss_color: dimension mismatch");
  const double l1 = image_l1(rendered, gt);
  const double dssim = (1.0 - ssim_mean(rendered, gt)) / 2.0;
  return 0.8 * l1 + 0.2 * dssim;
}

namespace {

class ColorLossOp final : public TapeOp {
 public:
  ColorLossOp(ValueId color, Image gt, ValueId out) : color_(color), gt_(std::move(gt)), out_(out) {}
  const char* name() const override { return "color_loss"; }

  void backward(Tape& tape) override {
    const double lbar = tape.grad(out_)[0];
    if (lbar == 0.0) return;
    const auto& cv = tape.value(color_);
    auto& cg = tape.grad(color_);
    const int64_t count = static_cast<int64_t>(cv.size());
    // L1 term
    const double l1_coef = lbar * 0.8 / static_cast<double>(count);
    for (int64_t k = 0; k < count; ++k) {
      const double diff = cv[static_cast<size_t>(k)] - gt_.data[static_cast<size_t>(k)];
      if (diff > 0.0) cg[static_cast<size_t>(k)] += l1_coef;
      else if (diff < 0.0) cg[static_cast<size_t>(k)] -= l1_coef;
    }
    // DSSIM term: d/dc of 0.2 * (1 - ssim)/2 = -0.1 * d(ssim)/dc
    Image rendered(gt_.width, gt_.height, gt_.channels);
    rendered.data = cv;
    Image grad_img(gt_.width, gt_.height, gt_.channels);
    ssim_backward(rendered, gt_, 1.0, grad_img);
    const double ssim_coef = lbar * -0.1;
    for (int64_t k = 0; k < count; ++k)
      cg[static_cast<size_t>(k)] += ssim_coef * grad_img.data[static_cast<size_t>(k)];
  }

 private:
  ValueId color_;
  Image gt_;
  ValueId out_;
};

}  // namespace

ValueId color_loss_op(Tape& tape, const RenderNodes& nodes, const Image& gt) {
  require(gt.width == nodes.width && gt.height == nodes.height && gt.channels == 3,
          "color_loss: dimension mismatch");
  Image rendered(nodes.width, nodes.height, 3);
  rendered.data = tape.value(nodes.color);
  const double loss = loss_color(rendered, gt);
  ValueId out = tape.alloc_value({loss});
  auto* op = tape.record<ColorLossOp>(nodes.color, gt, out);
  Tape::check_finite(tape.value(out), op->index, "color_loss", "output");
  return out;
}

}  // namespace gssdf
