#include "buddykit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <stdexcept>
#include <vector>

#include "buddykit/patch.hpp"

namespace buddykit {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double time_search_ms(const PatchGrid& queries, const PatchGrid& gts, const PatchDatabase& db,
                      const BuddySearchConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const BuddyAssignment a = buddy_search(queries, gts, db, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  (void)a;
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

std::pair<Image, Image> make_bench_pair(int size, std::uint64_t seed) {
  if (size % 12 != 0 || size < 12)
    throw std::invalid_argument("make_bench_pair: size must be a positive multiple of 12");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  // Coarse noise upsampled x8 gives natural-image-like smooth structure.
  const int coarse = std::max(4, size / 8);
  Image base(coarse, coarse, 3);
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data[i] = uniform();
  Image hr = bicubic_resample(base, ResampleSpec{size / coarse, ResampleDirection::up, false});

  Image sr = hr;
  for (Eigen::Index i = 0; i < sr.size(); ++i)
    sr.data[i] = std::clamp(sr.data[i] + 0.06 * (uniform() - 0.5), 0.0, 1.0);
  return {hr, sr};
}

BenchResult run_buddy_bench(int size, int iters, std::uint64_t seed, int threads) {
  if (iters < 1) throw std::invalid_argument("run_buddy_bench: iters must be >= 1");

  BenchResult result;
  result.size = size;
  result.iters = iters;
  result.outputs_match = true;

  std::vector<double> brute_times, fast_times;
  for (int it = 0; it < iters; ++it) {
    const auto [hr, sr] = make_bench_pair(size, seed + static_cast<std::uint64_t>(it));
    const auto pyramid = build_pyramid(hr);
    const PatchDatabase db = build_database(pyramid);
    const PatchGrid gts = unfold(hr, db.patch_size, db.query_stride);
    const PatchGrid queries = unfold(sr, db.patch_size, db.query_stride);

    BuddySearchConfig brute{1.0, 1.0, SearchMode::brute, threads};
    BuddySearchConfig fast{1.0, 1.0, SearchMode::accelerated, threads};

    const BuddyAssignment a = buddy_search(queries, gts, db, brute);
    const BuddyAssignment b = buddy_search(queries, gts, db, fast);
    for (size_t i = 0; i < a.records.size(); ++i)
      if (a.records[i].buddy_index != b.records[i].buddy_index) result.outputs_match = false;

    brute_times.push_back(time_search_ms(queries, gts, db, brute));
    fast_times.push_back(time_search_ms(queries, gts, db, fast));
  }

  result.brute_ms = median(brute_times);
  result.fast_ms = median(fast_times);
  result.speedup = result.brute_ms / result.fast_ms;
  return result;
}

}  // namespace buddykit
