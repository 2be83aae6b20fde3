#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace eptest {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives a child seed from a master seed and a path of stream identifiers.
///
/// Splitting scheme: h0 = splitmix64(seed), h_{k+1} = splitmix64(h_k ^ splitmix64(id_k + k + 1)).
/// The same (seed, path) always yields the same child regardless of which
/// thread asks for it, so results never depend on the thread count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = detail::splitmix64(seed);
  std::uint64_t k = 0;
  for (std::uint64_t id : path) {
    h = detail::splitmix64(h ^ detail::splitmix64(id + ++k));
  }
  return h;
}

inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

/// Well-known stream identifiers so independent stages never share draws.
namespace streams {
inline constexpr std::uint64_t kNull = 0x6e756c6cULL;
inline constexpr std::uint64_t kTest = 0x74657374ULL;
inline constexpr std::uint64_t kFit = 0x666974ULL;
inline constexpr std::uint64_t kMode = 0x6d6f6465ULL;
inline constexpr std::uint64_t kGibbs = 0x67696262ULL;
inline constexpr std::uint64_t kDesign = 0x64657369ULL;
inline constexpr std::uint64_t kReplicate = 0x7265706cULL;
}  // namespace streams

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
/// Work items must write to disjoint outputs; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace eptest
