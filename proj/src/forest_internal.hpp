#pragma once

#include <algorithm>
#include <atomic>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace ccf::detail {

inline std::vector<int> unique_clusters(std::span<const int> clusters) {
  std::vector<int> out(clusters.begin(), clusters.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Sample a fraction of clusters without replacement (at least one).
inline std::vector<int> sample_clusters(std::mt19937_64& rng,
                                        const std::vector<int>& clusters,
                                        double fraction) {
  std::vector<int> pool = clusters;
  auto m = static_cast<std::size_t>(fraction * static_cast<double>(pool.size()));
  m = std::clamp<std::size_t>(m, 1, pool.size());
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, pool.size() - 1);
    std::swap(pool[i], pool[d(rng)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline std::vector<int> rows_of_clusters(std::span<const int> clusters,
                                         const std::vector<int>& chosen) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < clusters.size(); ++i)
    if (std::binary_search(chosen.begin(), chosen.end(), clusters[i]))
      rows.push_back(static_cast<int>(i));
  return rows;
}

/// mtry feature indices without replacement, returned sorted so candidate
/// enumeration order (and tie-breaking) is stable.
inline std::vector<int> sample_features(std::mt19937_64& rng, int k, int mtry) {
  std::vector<int> all(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) all[static_cast<std::size_t>(j)] = j;
  if (mtry >= k) return all;
  for (int i = 0; i < mtry; ++i) {
    std::uniform_int_distribution<int> d(i, k - 1);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(d(rng))]);
  }
  all.resize(static_cast<std::size_t>(mtry));
  std::sort(all.begin(), all.end());
  return all;
}

/// Split rows into two halves respecting cluster boundaries: clusters are
/// shuffled and alternately assigned, so the halves never share a cluster.
inline std::pair<std::vector<int>, std::vector<int>> split_half_by_cluster(
    std::mt19937_64& rng, const std::vector<int>& rows, std::span<const int> clusters) {
  std::vector<int> cl;
  for (int r : rows) cl.push_back(clusters[static_cast<std::size_t>(r)]);
  std::sort(cl.begin(), cl.end());
  cl.erase(std::unique(cl.begin(), cl.end()), cl.end());
  std::shuffle(cl.begin(), cl.end(), rng);
  std::vector<int> first(cl.begin(), cl.begin() + static_cast<long>((cl.size() + 1) / 2));
  std::sort(first.begin(), first.end());
  std::vector<int> a, b;
  for (int r : rows) {
    if (std::binary_search(first.begin(), first.end(),
                           clusters[static_cast<std::size_t>(r)]))
      a.push_back(r);
    else
      b.push_back(r);
  }
  return {std::move(a), std::move(b)};
}

/// Run fn(i) for i in [0, n) on up to n_threads workers. Work items are
/// independent; results must be written to pre-sized slots by index.
template <class Fn>
void parallel_for(std::size_t n, int n_threads, Fn&& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t workers = n_threads > 0 ? static_cast<std::size_t>(n_threads)
                                      : (hw ? hw : 4);
  workers = std::min<std::size_t>(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ccf::detail
