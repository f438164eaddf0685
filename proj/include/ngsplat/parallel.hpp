#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace ngs {

/// Number of worker threads to use when `requested` is 0 (auto).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Items per chunk for chunked parallel loops. Fixed so that results are
/// independent of the worker count: every chunk is reduced in index order.
inline constexpr std::int64_t kParallelChunk = 1024;

inline std::int64_t chunk_count(std::int64_t n) {
  return n <= 0 ? 0 : (n + kParallelChunk - 1) / kParallelChunk;
}

/// Runs body(chunk_index, begin, end) over [0, n) split into fixed-size
/// chunks. Each chunk writes only to its own slot, so the caller can merge
/// per-chunk partial results serially in chunk order and get bit-identical
/// output for any thread count.
inline void for_chunks(std::int64_t n, int threads,
                       const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& body) {
  const std::int64_t nchunks = chunk_count(n);
  if (nchunks == 0) return;
  threads = std::min<std::int64_t>(resolve_threads(threads), nchunks);
  if (threads <= 1) {
    for (std::int64_t c = 0; c < nchunks; ++c)
      body(c, c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t c = next.fetch_add(1);
        if (c >= nchunks) return;
        body(c, c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
      }
    });
  }
  for (auto& th : pool) th.join();
}

/// Deterministic 64-bit stream splitter (splitmix64); used to derive
/// per-trial and per-epoch seeds from one master seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ngs
