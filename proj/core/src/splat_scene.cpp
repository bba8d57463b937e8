#include "gssdf/splat_scene.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "gssdf/ply.hpp"

namespace gssdf {

Mat3 rotation_from_quat(const double* q_raw) {
  const double n = std::sqrt(q_raw[0] * q_raw[0] + q_raw[1] * q_raw[1] + q_raw[2] * q_raw[2] +
                             q_raw[3] * q_raw[3]);
  const double w = q_raw[0] / n, x = q_raw[1] / n, y = q_raw[2] / n, z = q_raw[3] / n;
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

void rotation_backward(const double* q_raw, const Mat3& r_adj, double* q_adj) {
  const double n = std::sqrt(q_raw[0] * q_raw[0] + q_raw[1] * q_raw[1] + q_raw[2] * q_raw[2] +
                             q_raw[3] * q_raw[3]);
  const double w = q_raw[0] / n, x = q_raw[1] / n, y = q_raw[2] / n, z = q_raw[3] / n;

  Mat3 dRdw, dRdx, dRdy, dRdz;
  dRdw << 0, -z, y, z, 0, -x, -y, x, 0;
  dRdx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dRdy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dRdz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;

  Vec4 g_hat;
  g_hat[0] = 2.0 * (r_adj.array() * dRdw.array()).sum();
  g_hat[1] = 2.0 * (r_adj.array() * dRdx.array()).sum();
  g_hat[2] = 2.0 * (r_adj.array() * dRdy.array()).sum();
  g_hat[3] = 2.0 * (r_adj.array() * dRdz.array()).sum();

  // through the normalization q_hat = q / |q|
  const Vec4 q_hat(w, x, y, z);
  const Vec4 g = (g_hat - q_hat * q_hat.dot(g_hat)) / n;
  for (int i = 0; i < 4; ++i) q_adj[i] += g[i];
}

SplatScene::SplatScene(int sh_degree)
    : sh_degree_(sh_degree),
      positions_("splat_positions", {0, 3}),
      rotations_("splat_rotations", {0, 4}),
      log_scales_("splat_log_scales", {0, 2}),
      opacity_logits_("splat_opacity_logits", {0, 1}),
      sh_("splat_sh", {0, 3 * sh_basis_count(sh_degree)}) {
  require(sh_degree >= 0 && sh_degree <= kMaxShDegree, "sh degree out of range");
}

namespace {
AdamGroup* owning_group(std::span<AdamGroup*> groups, const ParamTensor* t) {
  for (AdamGroup* g : groups)
    for (ParamTensor* p : g->params())
      if (p == t) return g;
  return nullptr;
}
}  // namespace

void SplatScene::append(std::span<const SplatDisk> splats, std::span<AdamGroup*> groups) {
  const int64_t old_n = size();
  const int64_t add = static_cast<int64_t>(splats.size());
  ParamTensor* tensors[] = {&positions_, &rotations_, &log_scales_, &opacity_logits_, &sh_};
  for (ParamTensor* t : tensors) {
    if (AdamGroup* g = owning_group(groups, t)) g->append_rows(add);
    else t->append_rows(add);
  }
  sky_.resize(static_cast<size_t>(old_n + add), 0);
  const int n_sh = sh_coeff_count();
  for (int64_t k = 0; k < add; ++k) {
    const SplatDisk& s = splats[static_cast<size_t>(k)];
    const int64_t i = old_n + k;
    for (int a = 0; a < 3; ++a) positions_[3 * i + a] = s.p[a];
    rotations_[4 * i + 0] = s.rot.w();
    rotations_[4 * i + 1] = s.rot.x();
    rotations_[4 * i + 2] = s.rot.y();
    rotations_[4 * i + 3] = s.rot.z();
    require(s.s_u > 0 && s.s_v > 0, "splat scales must be positive");
    log_scales_[2 * i + 0] = std::log(s.s_u);
    log_scales_[2 * i + 1] = std::log(s.s_v);
    const double a_clamped = std::min(1.0 - 1e-7, std::max(1e-7, s.alpha));
    opacity_logits_[i] = logit(a_clamped);
    for (int c = 0; c < n_sh; ++c)
      sh_[n_sh * i + c] = c < static_cast<int>(s.sh.size()) ? s.sh[static_cast<size_t>(c)] : 0.0;
    sky_[static_cast<size_t>(i)] = s.is_sky ? 1 : 0;
  }
  stats_.ensure(size());
}

SplatDisk SplatScene::get(int64_t i) const {
  SplatDisk s;
  s.p = position(i);
  s.rot = Quat(rotations_[4 * i], rotations_[4 * i + 1], rotations_[4 * i + 2],
               rotations_[4 * i + 3])
              .normalized();
  s.s_u = std::exp(log_scales_[2 * i]);
  s.s_v = std::exp(log_scales_[2 * i + 1]);
  s.alpha = sigmoid(opacity_logits_[i]);
  s.sh.assign(sh_.data() + sh_coeff_count() * i, sh_.data() + sh_coeff_count() * (i + 1));
  s.is_sky = is_sky(i);
  return s;
}

Vec3 SplatScene::position(int64_t i) const {
  return Vec3(positions_[3 * i], positions_[3 * i + 1], positions_[3 * i + 2]);
}

Mat3 SplatScene::frame(int64_t i) const { return rotation_from_quat(rotations_.data() + 4 * i); }

Vec2 SplatScene::scales(int64_t i) const {
  return Vec2(std::exp(log_scales_[2 * i]), std::exp(log_scales_[2 * i + 1]));
}

double SplatScene::opacity(int64_t i) const { return sigmoid(opacity_logits_[i]); }

const double* SplatScene::sh_coeffs(int64_t i) const {
  return sh_.data() + sh_coeff_count() * i;
}

int64_t SplatScene::sky_count() const {
  int64_t n = 0;
  for (uint8_t s : sky_) n += s ? 1 : 0;
  return n;
}

std::vector<ParamTensor*> SplatScene::structural_params() {
  return {&positions_, &rotations_, &log_scales_, &opacity_logits_};
}

std::vector<ParamTensor*> SplatScene::all_params() {
  return {&positions_, &rotations_, &log_scales_, &opacity_logits_, &sh_};
}

void SplatScene::renormalize_rotations() {
  for (int64_t i = 0; i < size(); ++i) {
    double* q = rotations_.data() + 4 * i;
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    require(n > 1e-12, "quaternion collapsed to zero");
    for (int a = 0; a < 4; ++a) q[a] /= n;
  }
}

void SplatScene::clamp_scales(double s_min, double s_max) {
  const double lo = std::log(s_min), hi = std::log(s_max);
  for (int64_t i = 0; i < 2 * size(); ++i)
    log_scales_[i] = std::min(hi, std::max(lo, log_scales_[i]));
}

void SplatScene::Stats::reset(int64_t n) {
  pos_grad_norm_sum.assign(static_cast<size_t>(n), 0.0);
  pos_grad_count.assign(static_cast<size_t>(n), 0);
  max_kernel.assign(static_cast<size_t>(n), 0.0);
}

void SplatScene::Stats::ensure(int64_t n) {
  pos_grad_norm_sum.resize(static_cast<size_t>(n), 0.0);
  pos_grad_count.resize(static_cast<size_t>(n), 0);
  max_kernel.resize(static_cast<size_t>(n), 0.0);
}

DensifyReport SplatScene::densify_and_prune(const DensifyConfig& cfg, Rng& rng,
                                            std::span<AdamGroup*> groups) {
  const int64_t n = size();
  stats_.ensure(n);
  DensifyReport report;

  std::vector<uint8_t> keep(static_cast<size_t>(n), 1);
  std::vector<SplatDisk> born;
  int64_t budget = cfg.max_splats > 0 ? std::max<int64_t>(0, cfg.max_splats - n)
                                      : std::numeric_limits<int64_t>::max();

  for (int64_t i = 0; i < n; ++i) {
    if (is_sky(i)) continue;
    if (opacity(i) < cfg.opacity_floor) {
      keep[static_cast<size_t>(i)] = 0;
      ++report.pruned;
      continue;
    }
    const int32_t cnt = stats_.pos_grad_count[static_cast<size_t>(i)];
    if (cnt == 0) continue;
    const double mean_grad = stats_.pos_grad_norm_sum[static_cast<size_t>(i)] / cnt;
    if (mean_grad <= cfg.grad_threshold) continue;

    SplatDisk s = get(i);
    if (std::max(s.s_u, s.s_v) > cfg.scale_split) {
      if (budget < 1) continue;
      // split: two children sampled on the disk, scales shrunk
      keep[static_cast<size_t>(i)] = 0;
      const Mat3 R = frame(i);
      for (int k = 0; k < 2 && budget > 0; ++k, --budget) {
        SplatDisk child = s;
        const double u = rng.normal(), v = rng.normal();
        child.p = disk_point(s.p, R.col(0), R.col(1), s.s_u, s.s_v, u, v);
        child.s_u = s.s_u / cfg.split_shrink;
        child.s_v = s.s_v / cfg.split_shrink;
        born.push_back(std::move(child));
      }
      ++report.split;
    } else {
      if (budget < 1) continue;
      born.push_back(s);
      --budget;
      ++report.cloned;
    }
  }

  int64_t kept = 0;
  for (uint8_t k : keep) kept += k;
  require(kept + static_cast<int64_t>(born.size()) > 0,
          "densify_and_prune: scene would become empty");

  ParamTensor* tensors[] = {&positions_, &rotations_, &log_scales_, &opacity_logits_, &sh_};
  for (ParamTensor* t : tensors) {
    if (AdamGroup* g = owning_group(groups, t)) g->keep_rows(keep);
    else t->keep_rows(keep);
  }
  std::vector<uint8_t> new_sky;
  new_sky.reserve(static_cast<size_t>(kept));
  for (int64_t i = 0; i < n; ++i)
    if (keep[static_cast<size_t>(i)]) new_sky.push_back(sky_[static_cast<size_t>(i)]);
  sky_ = std::move(new_sky);

  if (!born.empty()) append(born, groups);
  report.total_after = size();
  stats_.reset(size());
  return report;
}

void SplatScene::save(std::ostream& os) const {
  auto write_pod = [&](auto v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  write_pod(uint32_t{1});
  write_pod(int32_t{sh_degree_});
  write_pod(int64_t{size()});
  const ParamTensor* tensors[] = {&positions_, &rotations_, &log_scales_, &opacity_logits_, &sh_};
  for (const ParamTensor* t : tensors)
    os.write(reinterpret_cast<const char*>(t->data()),
             static_cast<std::streamsize>(t->size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(sky_.data()),
           static_cast<std::streamsize>(sky_.size()));
}

SplatScene SplatScene::load(std::istream& is) {
  auto read_u32 = [&] {
    uint32_t v;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  const uint32_t ver = read_u32();
  require(ver == 1u, "splat blob: unsupported version " + std::to_string(ver));
  int32_t deg;
  is.read(reinterpret_cast<char*>(&deg), sizeof(deg));
  int64_t n;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  SplatScene scene(deg);
  ParamTensor* tensors[] = {&scene.positions_, &scene.rotations_, &scene.log_scales_,
                            &scene.opacity_logits_, &scene.sh_};
  for (ParamTensor* t : tensors) {
    t->append_rows(n);
    is.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  scene.sky_.resize(static_cast<size_t>(n));
  is.read(reinterpret_cast<char*>(scene.sky_.data()), static_cast<std::streamsize>(n));
  require(is.good(), "splat blob: truncated");
  scene.stats_.reset(n);
  return scene;
}

void SplatScene::export_ply(const std::string& path) const {
  PlyPoints pts;
  pts.properties = {"x", "y", "z", "qw", "qx", "qy", "qz", "scale_u", "scale_v", "opacity", "sky"};
  const int n_sh = sh_coeff_count();
  for (int c = 0; c < n_sh; ++c) pts.properties.push_back("sh_" + std::to_string(c));
  pts.columns.assign(pts.properties.size(), std::vector<double>(static_cast<size_t>(size())));
  for (int64_t i = 0; i < size(); ++i) {
    const SplatDisk s = get(i);
    size_t c = 0;
    pts.columns[c++][static_cast<size_t>(i)] = s.p.x();
    pts.columns[c++][static_cast<size_t>(i)] = s.p.y();
    pts.columns[c++][static_cast<size_t>(i)] = s.p.z();
    pts.columns[c++][static_cast<size_t>(i)] = s.rot.w();
    pts.columns[c++][static_cast<size_t>(i)] = s.rot.x();
    pts.columns[c++][static_cast<size_t>(i)] = s.rot.y();
    pts.columns[c++][static_cast<size_t>(i)] = s.rot.z();
    pts.columns[c++][static_cast<size_t>(i)] = s.s_u;
    pts.columns[c++][static_cast<size_t>(i)] = s.s_v;
    pts.columns[c++][static_cast<size_t>(i)] = s.alpha;
    pts.columns[c++][static_cast<size_t>(i)] = s.is_sky ? 1.0 : 0.0;
    for (int k = 0; k < n_sh; ++k)
      pts.columns[c++][static_cast<size_t>(i)] = s.sh[static_cast<size_t>(k)];
  }
  write_ply_points(path, pts);
}

}  // namespace gssdf
