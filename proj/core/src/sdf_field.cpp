#include "gssdf/sdf_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "gssdf/parallel.hpp"

namespace gssdf {

namespace {

constexpr int kBlock = 64;       // points per kernel block
constexpr int64_t kChunk = 512;  // points per parallel chunk

// Spatial hash for levels whose dense grid exceeds the table size.
inline uint64_t hash_corner(int64_t ix, int64_t iy, int64_t iz, uint64_t mask) {
  const uint64_t h = (static_cast<uint64_t>(ix) * 73856093ULL) ^
                     (static_cast<uint64_t>(iy) * 19349663ULL) ^
                     (static_cast<uint64_t>(iz) * 83492791ULL);
  return h & mask;
}

// Plane kernels with compile-time column counts so the inner loops fully
// vectorize. N is kBlock (value path) or 3*kBlock (tangent path).

// C[o][p] = b[o] + sum_i W[o][i] * A[i][p]
template <int N>
void gemm_fwd_n(const double* __restrict W, const double* __restrict b,
                const double* __restrict A, double* __restrict C, int O, int I) {
  for (int o = 0; o < O; ++o) {
    double* __restrict crow = C + static_cast<int64_t>(o) * N;
    const double bo = b ? b[o] : 0.0;
    for (int p = 0; p < N; ++p) crow[p] = bo;
    const double* __restrict wrow = W + static_cast<int64_t>(o) * I;
    int i = 0;
    for (; i + 2 <= I; i += 2) {
      const double w0 = wrow[i], w1 = wrow[i + 1];
      const double* __restrict a0 = A + static_cast<int64_t>(i) * N;
      const double* __restrict a1 = a0 + N;
      for (int p = 0; p < N; ++p) crow[p] += w0 * a0[p] + w1 * a1[p];
    }
    for (; i < I; ++i) {
      const double w = wrow[i];
      const double* __restrict arow = A + static_cast<int64_t>(i) * N;
      for (int p = 0; p < N; ++p) crow[p] += w * arow[p];
    }
  }
}

// dW[o][i] += sum_p Cbar[o][p] * A[i][p];  db[o] += sum_p Cbar[o][p]
template <int N>
void gemm_acc_wgrad_n(const double* __restrict Cbar, const double* __restrict A,
                      double* __restrict dW, double* __restrict db, int O, int I) {
  for (int o = 0; o < O; ++o) {
    const double* __restrict cb = Cbar + static_cast<int64_t>(o) * N;
    if (db) {
      double s = 0.0;
#pragma omp simd reduction(+ : s)
      for (int p = 0; p < N; ++p) s += cb[p];
      db[o] += s;
    }
    double* __restrict dwrow = dW + static_cast<int64_t>(o) * I;
    int i = 0;
    for (; i + 2 <= I; i += 2) {
      const double* __restrict a0 = A + static_cast<int64_t>(i) * N;
      const double* __restrict a1 = a0 + N;
      double s0 = 0.0, s1 = 0.0;
#pragma omp simd reduction(+ : s0, s1)
      for (int p = 0; p < N; ++p) {
        s0 += cb[p] * a0[p];
        s1 += cb[p] * a1[p];
      }
      dwrow[i] += s0;
      dwrow[i + 1] += s1;
    }
    for (; i < I; ++i) {
      const double* __restrict arow = A + static_cast<int64_t>(i) * N;
      double s = 0.0;
#pragma omp simd reduction(+ : s)
      for (int p = 0; p < N; ++p) s += cb[p] * arow[p];
      dwrow[i] += s;
    }
  }
}

// Abar[i][p] = sum_o W[o][i] * Cbar[o][p]
template <int N>
void gemm_bwd_input_n(const double* __restrict W, const double* __restrict Cbar,
                      double* __restrict Abar, int O, int I) {
  for (int i = 0; i < I; ++i) {
    double* __restrict arow = Abar + static_cast<int64_t>(i) * N;
    for (int p = 0; p < N; ++p) arow[p] = 0.0;
  }
  for (int o = 0; o < O; ++o) {
    const double* __restrict cb = Cbar + static_cast<int64_t>(o) * N;
    const double* __restrict wrow = W + static_cast<int64_t>(o) * I;
    for (int i = 0; i < I; ++i) {
      const double w = wrow[i];
      if (w == 0.0) continue;
      double* __restrict arow = Abar + static_cast<int64_t>(i) * N;
      for (int p = 0; p < N; ++p) arow[p] += w * cb[p];
    }
  }
}

// Per-point trilinear interpolation footprint at one level.
struct CornerSet {
  int64_t idx[8];     // table entry index (within level)
  double w[8];        // trilinear weight
  double dw[8][3];    // d(weight)/dx, zero along clamped axes
};

}  // namespace

int HashGridConfig::resolution(int level) const {
  return static_cast<int>(std::floor(static_cast<double>(base_resolution) *
                                     std::pow(growth_factor, level)));
}

void HashGridConfig::validate() const {
  require(levels >= 1 && features_per_level >= 1, "hash grid: empty layout");
  require(levels * features_per_level == 32,
          "hash grid: levels * features_per_level must equal 32");
  require(bounds.valid(), "hash grid: degenerate bounds");
  require(table_size_log2 >= 4 && table_size_log2 <= 24, "hash grid: table_size_log2 out of range");
  for (int l = 1; l < levels; ++l) {
    require(resolution(l) > resolution(l - 1), "hash grid: resolutions must strictly increase");
  }
}

SdfField::SdfField(SdfFieldConfig cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.grid.validate();
  require(cfg_.hidden_width >= 2 && cfg_.hidden_layers >= 1, "field: MLP too small");

  const int64_t table_cap = int64_t(1) << cfg_.grid.table_size_log2;
  int64_t total = 0;
  for (int l = 0; l < cfg_.grid.levels; ++l) {
    const int64_t side = cfg_.grid.resolution(l) + 1;
    const int64_t dense = side * side * side;
    const int64_t entries = std::min(dense, table_cap);
    level_offsets_.push_back(total);
    level_sizes_.push_back(entries);
    total += entries;
  }

  Rng rng(derive_seed(seed, "sdf_field_init"));
  tables_ = ParamTensor("grid_tables", {total, cfg_.grid.features_per_level});
  tables_.fill_normal(rng, 1e-4);

  const int F = cfg_.grid.feature_width();
  const int H = cfg_.hidden_width;
  std::vector<std::pair<int, int>> dims;  // (out, in)
  dims.emplace_back(H, F);
  for (int k = 1; k < cfg_.hidden_layers; ++k) dims.emplace_back(H, H);
  dims.emplace_back(2, H);

  for (size_t k = 0; k < dims.size(); ++k) {
    auto [out, in] = dims[k];
    weights_.emplace_back("mlp_w" + std::to_string(k), std::vector<int64_t>{out, in});
    biases_.emplace_back("mlp_b" + std::to_string(k), std::vector<int64_t>{out});
    const double bound = std::sqrt(6.0 / (in + out));
    weights_.back().fill_uniform(rng, -bound, bound);
    // keep the initial distance near zero everywhere
    if (k + 1 == dims.size()) {
      for (int64_t i = 0; i < weights_.back().size(); ++i) weights_.back()[i] *= 1e-2;
    }
  }
}

int64_t SdfField::table_entries(int level) const {
  return level_sizes_[static_cast<size_t>(level)];
}

int64_t SdfField::param_count() const {
  int64_t n = tables_.size();
  for (const auto& w : weights_) n += w.size();
  for (const auto& b : biases_) n += b.size();
  return n;
}

std::vector<ParamTensor*> SdfField::params() {
  std::vector<ParamTensor*> out;
  out.push_back(&tables_);
  for (size_t k = 0; k < weights_.size(); ++k) {
    out.push_back(&weights_[k]);
    out.push_back(&biases_[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fused kernels
// ---------------------------------------------------------------------------

struct FieldKernels {
  const SdfField& f;
  int F, H, L;  // feature width, hidden width, hidden layers

  explicit FieldKernels(const SdfField& field)
      : f(field),
        F(field.cfg_.grid.feature_width()),
        H(field.cfg_.hidden_width),
        L(field.cfg_.hidden_layers) {}

  // Per-block scratch; sized once per chunk.
  struct Scratch {
    std::vector<CornerSet> corners;    // [B * levels]
    std::vector<uint8_t> clamped;      // [B]
    std::vector<double> enc;           // [F * B]
    std::vector<double> denc;          // [F * 3B]
    std::vector<std::vector<double>> act;   // per layer, [H * B]
    std::vector<std::vector<double>> tang;  // per layer, [H * 3B]
    std::vector<double> head;          // [2 * B]
    std::vector<double> head_tang;     // [1 * 3B] (distance row only)
    // backward temporaries
    std::vector<double> hbar, hbar2, tbar, tbar2;

    void resize(int F, int H, int L, int levels) {
      corners.resize(static_cast<size_t>(kBlock) * levels);
      clamped.resize(kBlock);
      enc.assign(static_cast<size_t>(F) * kBlock, 0.0);
      denc.assign(static_cast<size_t>(F) * 3 * kBlock, 0.0);
      act.assign(static_cast<size_t>(L), std::vector<double>(static_cast<size_t>(H) * kBlock));
      tang.assign(static_cast<size_t>(L),
                  std::vector<double>(static_cast<size_t>(H) * 3 * kBlock));
      head.assign(static_cast<size_t>(2) * kBlock, 0.0);
      head_tang.assign(static_cast<size_t>(3) * kBlock, 0.0);
      const int wide = std::max(F, H);  // adjoint buffers also hold the encoding rows
      hbar.assign(static_cast<size_t>(wide) * kBlock, 0.0);
      hbar2.assign(static_cast<size_t>(wide) * kBlock, 0.0);
      tbar.assign(static_cast<size_t>(wide) * 3 * kBlock, 0.0);
      tbar2.assign(static_cast<size_t>(wide) * 3 * kBlock, 0.0);
    }
  };

  // Computes interpolation footprints + encoding planes for points [0, bn).
  void encode_block(const double* xs, int bn, bool want_tangent, Scratch& s) const {
    const auto& grid = f.cfg_.grid;
    const Vec3 bmin = grid.bounds.min;
    const Vec3 ext = grid.bounds.extent();
    const uint64_t table_cap = uint64_t(1) << grid.table_size_log2;
    const int feats = grid.features_per_level;

    std::fill(s.enc.begin(), s.enc.end(), 0.0);
    if (want_tangent) std::fill(s.denc.begin(), s.denc.end(), 0.0);

    for (int p = 0; p < bn; ++p) {
      const double* xp = xs + 3 * p;
      require(std::isfinite(xp[0]) && std::isfinite(xp[1]) && std::isfinite(xp[2]),
              "field query: non-finite point");
      double x01[3];
      bool axis_clamped[3];
      bool any_clamped = false;
      for (int a = 0; a < 3; ++a) {
        double t = (xp[a] - bmin[a]) / ext[a];
        axis_clamped[a] = t < 0.0 || t > 1.0;
        any_clamped |= axis_clamped[a];
        x01[a] = std::min(1.0, std::max(0.0, t));
      }
      s.clamped[static_cast<size_t>(p)] = any_clamped ? 1 : 0;

      for (int l = 0; l < grid.levels; ++l) {
        const int res = grid.resolution(l);
        const int64_t side = res + 1;
        const bool dense = side * side * side <= static_cast<int64_t>(table_cap);
        int64_t ci[3];
        double fr[3], dscale[3];
        for (int a = 0; a < 3; ++a) {
          const double pos = x01[a] * res;
          int64_t c = static_cast<int64_t>(std::floor(pos));
          if (c >= res) c = res - 1;
          if (c < 0) c = 0;
          ci[a] = c;
          fr[a] = pos - static_cast<double>(c);
          dscale[a] = axis_clamped[a] ? 0.0 : static_cast<double>(res) / ext[a];
        }
        CornerSet& cs = s.corners[static_cast<size_t>(p) * grid.levels + l];
        for (int c = 0; c < 8; ++c) {
          const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
          const int64_t ix = ci[0] + dx, iy = ci[1] + dy, iz = ci[2] + dz;
          cs.idx[c] = dense ? (ix + side * (iy + side * iz))
                            : static_cast<int64_t>(hash_corner(ix, iy, iz, table_cap - 1));
          const double wx = dx ? fr[0] : 1.0 - fr[0];
          const double wy = dy ? fr[1] : 1.0 - fr[1];
          const double wz = dz ? fr[2] : 1.0 - fr[2];
          cs.w[c] = wx * wy * wz;
          cs.dw[c][0] = (dx ? 1.0 : -1.0) * dscale[0] * wy * wz;
          cs.dw[c][1] = (dy ? 1.0 : -1.0) * dscale[1] * wx * wz;
          cs.dw[c][2] = (dz ? 1.0 : -1.0) * dscale[2] * wx * wy;
        }
        const double* tab = f.tables_.data() + (f.level_offsets_[static_cast<size_t>(l)]) * feats;
        for (int j = 0; j < feats; ++j) {
          double e = 0.0, ex = 0.0, ey = 0.0, ez = 0.0;
          for (int c = 0; c < 8; ++c) {
            const double fv = tab[cs.idx[c] * feats + j];
            e += cs.w[c] * fv;
            ex += cs.dw[c][0] * fv;
            ey += cs.dw[c][1] * fv;
            ez += cs.dw[c][2] * fv;
          }
          const int row = l * feats + j;
          s.enc[static_cast<size_t>(row) * kBlock + p] = e;
          if (want_tangent) {
            double* trow = s.denc.data() + static_cast<size_t>(row) * 3 * kBlock;
            trow[0 * kBlock + p] = ex;
            trow[1 * kBlock + p] = ey;
            trow[2 * kBlock + p] = ez;
          }
        }
      }
    }
  }

  // Full forward for a block; fills scratch activations and heads.
  void forward_block(const double* xs, int bn, bool want_tangent, Scratch& s) const {
    encode_block(xs, bn, want_tangent, s);
    const double* in = s.enc.data();
    const double* tin = s.denc.data();
    int in_w = F;
    for (int k = 0; k < L; ++k) {
      const double* W = f.weights_[static_cast<size_t>(k)].data();
      const double* b = f.biases_[static_cast<size_t>(k)].data();
      double* a = s.act[static_cast<size_t>(k)].data();
      gemm_fwd_n<kBlock>(W, b, in, a, H, in_w);
      if (want_tangent) {
        double* t = s.tang[static_cast<size_t>(k)].data();
        gemm_fwd_n<3 * kBlock>(W, nullptr, tin, t, H, in_w);
        for (int u = 0; u < H; ++u) {
          const double* arow = a + static_cast<int64_t>(u) * kBlock;
          double* trow = t + static_cast<int64_t>(u) * 3 * kBlock;
          for (int p = 0; p < kBlock; ++p) {
            if (arow[p] <= 0.0) {
              trow[0 * kBlock + p] = 0.0;
              trow[1 * kBlock + p] = 0.0;
              trow[2 * kBlock + p] = 0.0;
            }
          }
        }
        tin = t;
      }
      // ReLU
      for (int64_t i = 0; i < static_cast<int64_t>(H) * kBlock; ++i)
        if (a[i] < 0.0) a[i] = 0.0;
      in = a;
      in_w = H;
    }
    const double* Wl = f.weights_.back().data();
    const double* bl = f.biases_.back().data();
    gemm_fwd_n<kBlock>(Wl, bl, in, s.head.data(), 2, H);
    if (want_tangent) {
      gemm_fwd_n<3 * kBlock>(Wl, nullptr, tin, s.head_tang.data(), 1, H);
    }
    (void)bn;
  }
};

void SdfField::query_batch(const double* xs, int64_t n, bool want_gradient,
                           FieldQueryResult& out) const {
  out.sdf.assign(static_cast<size_t>(n), 0.0);
  out.beta.assign(static_cast<size_t>(n), 0.0);
  out.clamped.assign(static_cast<size_t>(n), 0);
  out.grad.assign(want_gradient ? static_cast<size_t>(3 * n) : 0, 0.0);

  FieldKernels kern(*this);
  parallel_chunks(n, kChunk, [&](int64_t begin, int64_t end, int) {
    FieldKernels::Scratch scratch;
    scratch.resize(kern.F, kern.H, kern.L, cfg_.grid.levels);
    for (int64_t b = begin; b < end; b += kBlock) {
      const int bn = static_cast<int>(std::min<int64_t>(kBlock, end - b));
      kern.forward_block(xs + 3 * b, bn, want_gradient, scratch);
      for (int p = 0; p < bn; ++p) {
        out.sdf[static_cast<size_t>(b + p)] = scratch.head[p];
        out.beta[static_cast<size_t>(b + p)] =
            softplus(scratch.head[kBlock + p]) + cfg_.beta_min;
        out.clamped[static_cast<size_t>(b + p)] = scratch.clamped[static_cast<size_t>(p)];
        if (want_gradient) {
          for (int a = 0; a < 3; ++a)
            out.grad[static_cast<size_t>(3 * (b + p) + a)] =
                scratch.head_tang[static_cast<size_t>(a) * kBlock + p];
        }
      }
    }
  });
}

void SdfField::query_backward(const double* xs, int64_t n, const double* sdf_adj,
                              const double* beta_adj, const double* grad_adj) {
  const bool g_path = grad_adj != nullptr;
  FieldKernels kern(*this);
  const int slots = parallel_slot_count();
  const int F = kern.F, H = kern.H, L = kern.L;
  const int feats = cfg_.grid.features_per_level;

  // Per-slot gradient buffers, merged in slot order afterwards. The buffers
  // persist across calls; only zeroed here.
  auto& slot_grads = grad_scratch_;
  slot_grads.resize(static_cast<size_t>(slots));
  for (auto& sg : slot_grads) {
    sg.dW.resize(weights_.size());
    sg.db.resize(biases_.size());
    for (size_t k = 0; k < weights_.size(); ++k) {
      sg.dW[k].assign(static_cast<size_t>(weights_[k].size()), 0.0);
      sg.db[k].assign(static_cast<size_t>(biases_[k].size()), 0.0);
    }
    sg.dtab.assign(static_cast<size_t>(tables_.size()), 0.0);
  }

  parallel_chunks(n, kChunk, [&](int64_t begin, int64_t end, int slot) {
    FieldKernels::Scratch s;
    s.resize(F, H, L, cfg_.grid.levels);
    SlotGrads& sg = slot_grads[static_cast<size_t>(slot)];

    for (int64_t blk = begin; blk < end; blk += kBlock) {
      const int bn = static_cast<int>(std::min<int64_t>(kBlock, end - blk));
      kern.forward_block(xs + 3 * blk, bn, g_path, s);

      // Head adjoints.
      std::vector<double> out_bar(static_cast<size_t>(2) * kBlock, 0.0);
      std::vector<double> tout_bar(static_cast<size_t>(3) * kBlock, 0.0);
      for (int p = 0; p < bn; ++p) {
        const double sb = sdf_adj ? sdf_adj[blk + p] : 0.0;
        const double bb = beta_adj ? beta_adj[blk + p] : 0.0;
        out_bar[p] = sb;
        out_bar[kBlock + p] = bb * sigmoid(s.head[kBlock + p]);  // softplus'
        if (g_path) {
          for (int a = 0; a < 3; ++a)
            tout_bar[static_cast<size_t>(a) * kBlock + p] = grad_adj[3 * (blk + p) + a];
        }
      }

      const double* a_last = L > 0 ? s.act[static_cast<size_t>(L - 1)].data() : s.enc.data();
      const double* t_last = L > 0 ? s.tang[static_cast<size_t>(L - 1)].data() : s.denc.data();
      const int last_w = L > 0 ? H : F;

      // Head layer: value path and (row 0 only) tangent path.
      const size_t kl = weights_.size() - 1;
      gemm_acc_wgrad_n<kBlock>(out_bar.data(), a_last, sg.dW[kl].data(), sg.db[kl].data(),
                               2, last_w);
      gemm_bwd_input_n<kBlock>(weights_[kl].data(), out_bar.data(), s.hbar.data(), 2, last_w);
      if (g_path) {
        gemm_acc_wgrad_n<3 * kBlock>(tout_bar.data(), t_last, sg.dW[kl].data(), nullptr, 1,
                                     last_w);
        gemm_bwd_input_n<3 * kBlock>(weights_[kl].data(), tout_bar.data(), s.tbar.data(), 1,
                                     last_w);
      }

      // Hidden layers, reverse order.
      double* hbar = s.hbar.data();
      double* hbar_next = s.hbar2.data();
      double* tbar = s.tbar.data();
      double* tbar_next = s.tbar2.data();
      for (int k = L - 1; k >= 0; --k) {
        double* a = s.act[static_cast<size_t>(k)].data();
        // Mask adjoints by the ReLU response.
        for (int u = 0; u < H; ++u) {
          const double* arow = a + static_cast<int64_t>(u) * kBlock;
          double* hrow = hbar + static_cast<int64_t>(u) * kBlock;
          for (int p = 0; p < kBlock; ++p)
            if (arow[p] <= 0.0) hrow[p] = 0.0;
          if (g_path) {
            double* trow = tbar + static_cast<int64_t>(u) * 3 * kBlock;
            for (int p = 0; p < kBlock; ++p) {
              if (arow[p] <= 0.0) {
                trow[0 * kBlock + p] = 0.0;
                trow[1 * kBlock + p] = 0.0;
                trow[2 * kBlock + p] = 0.0;
              }
            }
          }
        }
        const double* below_a = k > 0 ? s.act[static_cast<size_t>(k - 1)].data() : s.enc.data();
        const double* below_t =
            k > 0 ? s.tang[static_cast<size_t>(k - 1)].data() : s.denc.data();
        const int below_w = k > 0 ? H : F;
        gemm_acc_wgrad_n<kBlock>(hbar, below_a, sg.dW[static_cast<size_t>(k)].data(),
                                 sg.db[static_cast<size_t>(k)].data(), H, below_w);
        gemm_bwd_input_n<kBlock>(weights_[static_cast<size_t>(k)].data(), hbar, hbar_next, H,
                                 below_w);
        if (g_path) {
          gemm_acc_wgrad_n<3 * kBlock>(tbar, below_t, sg.dW[static_cast<size_t>(k)].data(),
                                       nullptr, H, below_w);
          gemm_bwd_input_n<3 * kBlock>(weights_[static_cast<size_t>(k)].data(), tbar, tbar_next,
                                       H, below_w);
        }
        std::swap(hbar, hbar_next);
        std::swap(tbar, tbar_next);
      }
      // hbar now holds enc_bar [F x B]; tbar holds denc_bar [F x 3B].

      // Scatter into table gradients.
      for (int p = 0; p < bn; ++p) {
        for (int l = 0; l < cfg_.grid.levels; ++l) {
          const CornerSet& cs = s.corners[static_cast<size_t>(p) * cfg_.grid.levels + l];
          double* dtab = sg.dtab.data() + level_offsets_[static_cast<size_t>(l)] * feats;
          for (int j = 0; j < feats; ++j) {
            const int row = l * feats + j;
            const double eb = hbar[static_cast<int64_t>(row) * kBlock + p];
            double tbx = 0.0, tby = 0.0, tbz = 0.0;
            if (g_path) {
              const double* trow = tbar + static_cast<int64_t>(row) * 3 * kBlock;
              tbx = trow[0 * kBlock + p];
              tby = trow[1 * kBlock + p];
              tbz = trow[2 * kBlock + p];
            }
            for (int c = 0; c < 8; ++c) {
              double acc = cs.w[c] * eb;
              if (g_path)
                acc += cs.dw[c][0] * tbx + cs.dw[c][1] * tby + cs.dw[c][2] * tbz;
              dtab[cs.idx[c] * feats + j] += acc;
            }
          }
        }
      }
    }
  });

  // Deterministic slot-order merge.
  for (const auto& sg : slot_grads) {
    for (size_t k = 0; k < weights_.size(); ++k) {
      double* g = weights_[k].grad();
      for (int64_t i = 0; i < weights_[k].size(); ++i) g[i] += sg.dW[k][static_cast<size_t>(i)];
      double* gb = biases_[k].grad();
      for (int64_t i = 0; i < biases_[k].size(); ++i) gb[i] += sg.db[k][static_cast<size_t>(i)];
    }
    double* gt = tables_.grad();
    for (int64_t i = 0; i < tables_.size(); ++i) gt[i] += sg.dtab[static_cast<size_t>(i)];
  }
}

std::pair<double, double> SdfField::query(const Vec3& x, bool* clamped) const {
  FieldQueryResult r;
  double buf[3] = {x.x(), x.y(), x.z()};
  query_batch(buf, 1, false, r);
  if (clamped) *clamped = r.clamped[0] != 0;
  return {r.sdf[0], r.beta[0]};
}

Vec3 SdfField::gradient(const Vec3& x, bool* degenerate) const {
  FieldQueryResult r;
  double buf[3] = {x.x(), x.y(), x.z()};
  query_batch(buf, 1, true, r);
  Vec3 g(r.grad[0], r.grad[1], r.grad[2]);
  if (degenerate) *degenerate = g.norm() < 1e-8;
  return g;
}

// ---------------------------------------------------------------------------
// Tape integration
// ---------------------------------------------------------------------------

namespace {

class FieldQueryOp final : public TapeOp {
 public:
  FieldQueryOp(SdfField& field, std::vector<double> pts, FieldQueryNodes nodes)
      : field_(field), pts_(std::move(pts)), nodes_(nodes) {}

  const char* name() const override { return "field_query"; }

  void backward(Tape& tape) override {
    const int64_t n = nodes_.count;
    const auto& sbar = tape.grad(nodes_.sdf);
    const auto& bbar = tape.grad(nodes_.beta);
    Tape::check_finite(sbar, index, name(), "sdf adjoint");
    Tape::check_finite(bbar, index, name(), "scale adjoint");
    const double* gbar = nullptr;
    if (nodes_.grad >= 0) {
      Tape::check_finite(tape.grad(nodes_.grad), index, name(), "gradient adjoint");
      gbar = tape.grad(nodes_.grad).data();
    }
    field_.query_backward(pts_.data(), n, sbar.data(), bbar.data(), gbar);
  }

 private:
  SdfField& field_;
  std::vector<double> pts_;
  FieldQueryNodes nodes_;
};

}  // namespace

FieldQueryNodes field_query_op(Tape& tape, SdfField& field, std::vector<double> points,
                               bool want_gradient) {
  const int64_t n = static_cast<int64_t>(points.size() / 3);
  FieldQueryResult r;
  field.query_batch(points.data(), n, want_gradient, r);
  FieldQueryNodes nodes;
  nodes.count = n;
  nodes.sdf = tape.alloc_value(std::move(r.sdf));
  nodes.beta = tape.alloc_value(std::move(r.beta));
  nodes.grad = want_gradient ? tape.alloc_value(std::move(r.grad)) : -1;
  auto* op = tape.record<FieldQueryOp>(field, std::move(points), nodes);
  Tape::check_finite(tape.value(nodes.sdf), op->index, "field_query", "sdf output");
  Tape::check_finite(tape.value(nodes.beta), op->index, "field_query", "scale output");
  if (want_gradient)
    Tape::check_finite(tape.value(nodes.grad), op->index, "field_query", "gradient output");
  return nodes;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {
template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
void write_tensor(std::ostream& os, const ParamTensor& t) {
  write_pod<int64_t>(os, static_cast<int64_t>(t.shape().size()));
  for (int64_t d : t.shape()) write_pod<int64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}
void read_tensor_into(std::istream& is, ParamTensor& t, const std::string& name) {
  const int64_t ndim = read_pod<int64_t>(is);
  std::vector<int64_t> shape(static_cast<size_t>(ndim));
  for (auto& d : shape) d = read_pod<int64_t>(is);
  t = ParamTensor(name, shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
}
}  // namespace

void SdfField::save(std::ostream& os) const {
  write_pod<uint32_t>(os, 1u);  // field blob version
  write_pod<int32_t>(os, cfg_.grid.levels);
  write_pod<int32_t>(os, cfg_.grid.features_per_level);
  write_pod<int32_t>(os, cfg_.grid.table_size_log2);
  write_pod<int32_t>(os, cfg_.grid.base_resolution);
  write_pod<double>(os, cfg_.grid.growth_factor);
  for (int a = 0; a < 3; ++a) write_pod<double>(os, cfg_.grid.bounds.min[a]);
  for (int a = 0; a < 3; ++a) write_pod<double>(os, cfg_.grid.bounds.max[a]);
  write_pod<int32_t>(os, cfg_.hidden_width);
  write_pod<int32_t>(os, cfg_.hidden_layers);
  write_pod<double>(os, cfg_.beta_min);
  write_tensor(os, tables_);
  write_pod<int32_t>(os, static_cast<int32_t>(weights_.size()));
  for (size_t k = 0; k < weights_.size(); ++k) {
    write_tensor(os, weights_[k]);
    write_tensor(os, biases_[k]);
  }
}

SdfField SdfField::load(std::istream& is) {
  const uint32_t ver = read_pod<uint32_t>(is);
  require(ver == 1u, "sdf field blob: unsupported version " + std::to_string(ver));
  SdfFieldConfig cfg;
  cfg.grid.levels = read_pod<int32_t>(is);
  cfg.grid.features_per_level = read_pod<int32_t>(is);
  cfg.grid.table_size_log2 = read_pod<int32_t>(is);
  cfg.grid.base_resolution = read_pod<int32_t>(is);
  cfg.grid.growth_factor = read_pod<double>(is);
  for (int a = 0; a < 3; ++a) cfg.grid.bounds.min[a] = read_pod<double>(is);
  for (int a = 0; a < 3; ++a) cfg.grid.bounds.max[a] = read_pod<double>(is);
  cfg.hidden_width = read_pod<int32_t>(is);
  cfg.hidden_layers = read_pod<int32_t>(is);
  cfg.beta_min = read_pod<double>(is);
  SdfField f(cfg, 0);
  read_tensor_into(is, f.tables_, "grid_tables");
  const int32_t nlayers = read_pod<int32_t>(is);
  require(nlayers == static_cast<int32_t>(f.weights_.size()), "sdf field blob: layer mismatch");
  for (size_t k = 0; k < f.weights_.size(); ++k) {
    read_tensor_into(is, f.weights_[k], "mlp_w" + std::to_string(k));
    read_tensor_into(is, f.biases_[k], "mlp_b" + std::to_string(k));
  }
  require(is.good(), "sdf field blob: truncated");
  return f;
}

}  // namespace gssdf
