#include <benchmark/benchmark.h>

#include "gssdf/rng.hpp"
#include "gssdf/sdf_field.hpp"

using namespace gssdf;

namespace {

SdfFieldConfig bench_config() {
  SdfFieldConfig cfg;
  cfg.grid.table_size_log2 = 15;
  cfg.grid.bounds = {Vec3(-2, -2, -2), Vec3(2, 2, 2)};
  return cfg;
}

std::vector<double> bench_points(int64_t n) {
  Rng rng(12345);
  std::vector<double> pts(static_cast<size_t>(3 * n));
  for (auto& v : pts) v = rng.uniform(-1.8, 1.8);
  return pts;
}

}  // namespace

static void BM_FieldForward(benchmark::State& state) {
  SdfField field(bench_config(), 1);
  const int64_t n = state.range(0);
  const auto pts = bench_points(n);
  FieldQueryResult r;
  for (auto _ : state) {
    field.query_batch(pts.data(), n, false, r);
    benchmark::DoNotOptimize(r.sdf.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FieldForward)->Arg(4096);

static void BM_FieldForwardWithGradient(benchmark::State& state) {
  SdfField field(bench_config(), 1);
  const int64_t n = state.range(0);
  const auto pts = bench_points(n);
  FieldQueryResult r;
  for (auto _ : state) {
    field.query_batch(pts.data(), n, true, r);
    benchmark::DoNotOptimize(r.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FieldForwardWithGradient)->Arg(4096);

static void BM_FieldBackward(benchmark::State& state) {
  SdfField field(bench_config(), 1);
  const int64_t n = state.range(0);
  const auto pts = bench_points(n);
  std::vector<double> sbar(static_cast<size_t>(n), 0.5);
  std::vector<double> bbar(static_cast<size_t>(n), 0.1);
  std::vector<double> gbar(static_cast<size_t>(3 * n), 0.2);
  for (auto _ : state) {
    field.query_backward(pts.data(), n, sbar.data(), bbar.data(), gbar.data());
    benchmark::DoNotOptimize(field.grid_tables().grad());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FieldBackward)->Arg(4096);
