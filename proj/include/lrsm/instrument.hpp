#pragma once

#include <atomic>
#include <cstdint>

namespace lrsm::instrument {

// Lightweight always-on probes backing two guarantees that are otherwise easy
// to break silently:
//   * likelihood evaluation after moment precompute touches nothing n-sized
//     (the evaluator notes the largest dimension of every temporary it makes);
//   * per-bootstrap-replicate work recomputes only the y-dependent moments.

inline std::atomic<std::int64_t>& precompute_calls() {
  static std::atomic<std::int64_t> c{0};
  return c;
}
inline std::atomic<std::int64_t>& y_refresh_calls() {
  static std::atomic<std::int64_t> c{0};
  return c;
}
inline std::atomic<std::int64_t>& moment_evals() {
  static std::atomic<std::int64_t> c{0};
  return c;
}
inline std::atomic<std::int64_t>& dense_evals() {
  static std::atomic<std::int64_t> c{0};
  return c;
}

// Largest single dimension of any temporary created by the moment-path
// evaluator since the last reset. Process-wide max across threads.
inline std::atomic<std::int64_t>& eval_dim_watermark() {
  static std::atomic<std::int64_t> w{0};
  return w;
}

inline void note_eval_dim(std::int64_t dim) {
  auto& w = eval_dim_watermark();
  std::int64_t cur = w.load(std::memory_order_relaxed);
  while (dim > cur &&
         !w.compare_exchange_weak(cur, dim, std::memory_order_relaxed)) {
  }
}

inline void reset_all() {
  precompute_calls() = 0;
  y_refresh_calls() = 0;
  moment_evals() = 0;
  dense_evals() = 0;
  eval_dim_watermark() = 0;
}

}  // namespace lrsm::instrument
