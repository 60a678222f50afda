#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace fixpose::detail {

/// Runs fn(begin, end, chunk) over `chunks` contiguous ranges covering [0, n).
/// Chunk boundaries depend only on (n, chunks), so per-chunk results merged in
/// chunk order are deterministic regardless of scheduling.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned chunks, Fn&& fn) {
  chunks = std::max(1u, std::min<unsigned>(chunks, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  auto range = [&](unsigned c) { return std::make_pair(n * c / chunks, n * (c + 1) / chunks); };
  if (chunks == 1) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(chunks - 1);
  for (unsigned c = 1; c < chunks; ++c) {
    workers.emplace_back([&, c] {
      const auto [b, e] = range(c);
      fn(b, e, c);
    });
  }
  const auto [b, e] = range(0);
  fn(b, e, 0u);
  for (auto& w : workers) w.join();
}

}  // namespace fixpose::detail
