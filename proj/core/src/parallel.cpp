#include "gssdf/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace gssdf {

namespace {
// Accumulation slots are fixed so that chunk->slot assignment (and therefore
// every reduction order) is independent of the actual thread count.
constexpr int kSlots = 4;
int g_threads = 0;
}  // namespace

int num_threads() {
  if (g_threads > 0) return g_threads;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void set_num_threads(int n) { g_threads = n; }

void parallel_chunks(int64_t n, int64_t grain,
                     const std::function<void(int64_t, int64_t, int)>& fn) {
  if (n <= 0) return;
  if (grain < 1) grain = 1;
  const int64_t n_chunks = (n + grain - 1) / grain;
  const int workers = std::min<int64_t>({num_threads(), kSlots, n_chunks});

  auto run_slot = [&](int slot) {
    for (int64_t c = slot; c < n_chunks; c += kSlots) {
      const int64_t begin = c * grain;
      const int64_t end = std::min(begin + grain, n);
      fn(begin, end, slot);
    }
  };

  if (workers <= 1) {
    for (int slot = 0; slot < kSlots; ++slot) run_slot(slot);
    return;
  }

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&, t] {
      for (int slot = t; slot < kSlots; slot += workers) run_slot(slot);
    });
  }
  for (auto& th : threads) th.join();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  const int64_t grain = std::max<int64_t>(1, n / (kSlots * 8));
  parallel_chunks(n, grain, [&](int64_t begin, int64_t end, int) {
    for (int64_t i = begin; i < end; ++i) fn(i);
  });
}

int parallel_slot_count() { return kSlots; }

}  // namespace gssdf
