#pragma once

#include <cstdint>

#include "buddykit/image.hpp"

namespace buddykit {

struct BenchResult {
  int size = 0;
  int iters = 0;
  double brute_ms = 0.0;
  double fast_ms = 0.0;
  double speedup = 0.0;
  bool outputs_match = false;
};

/// Random RGB test pair for search benchmarks: smooth content (bicubic
/// upsampling of coarse noise) plus a mild perturbation on the estimate, the
/// regime patch self-similarity search actually runs in.
std::pair<Image, Image> make_bench_pair(int size, std::uint64_t seed);

/// Median wall time of brute vs accelerated buddy search on `iters` random
/// pairs. Outputs are verified equal before timing.
BenchResult run_buddy_bench(int size, int iters, std::uint64_t seed, int threads);

}  // namespace buddykit
