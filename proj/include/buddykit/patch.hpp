#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "buddykit/image.hpp"

#include <nlohmann/json_fwd.hpp>

namespace buddykit {

using PatchMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Patches cut from one image, flattened row-major as
/// (patch_row * patch_size + patch_col) * channels + channel.
/// Patch i sits at origins[i]; origins enumerate the grid row-major.
struct PatchGrid {
  int patch_size = 3;
  int stride = 3;
  int channels = 1;
  int grid_rows = 0;
  int grid_cols = 0;
  PatchMatrix patches;  // one patch per row, patch_size^2 * channels columns
  std::vector<std::pair<int, int>> origins;

  Eigen::Index count() const { return patches.rows(); }
};

/// Supervision candidates pooled from every pyramid level (stride 1), with
/// (level, row, col) provenance. Candidates are stored level-major, so the
/// storage index order is exactly the lexicographic (level, row, col) order.
/// colocated_index maps each query-grid position on the full-resolution level
/// to the candidate that is bit-identical to its ground-truth patch.
struct PatchDatabase {
  struct Provenance {
    int level = 1;  // downscale factor of the source level: 1, 2 or 4
    int row = 0;
    int col = 0;
  };

  int patch_size = 3;
  int channels = 1;
  int query_stride = 3;
  PatchMatrix candidates;
  std::vector<Provenance> provenance;
  std::vector<Eigen::Index> colocated_index;

  // Pruning side tables, filled at build time: per-candidate mean and the
  // candidate order sorted by mean.
  Eigen::ArrayXd means;
  std::vector<Eigen::Index> order_by_mean;
  Eigen::ArrayXd sorted_means;

  Eigen::Index count() const { return candidates.rows(); }
};

enum class SearchMode { brute, accelerated };

struct BuddySearchConfig {
  double alpha = 1.0;
  double beta = 1.0;
  SearchMode mode = SearchMode::accelerated;
  int threads = 1;
};

/// One record per query patch: the winning candidate and its distances.
/// objective == alpha * dist_to_gt + beta * dist_to_est.
struct BuddyRecord {
  Eigen::Index query_index = 0;
  Eigen::Index buddy_index = 0;
  double objective = 0.0;
  double dist_to_gt = 0.0;
  double dist_to_est = 0.0;
};

struct BuddyAssignment {
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<BuddyRecord> records;
};

/// Three-level ground-truth pyramid: [full, x2 down, x4 down], antialiased
/// bicubic. Height and width must be divisible by 4.
std::array<Image, 3> build_pyramid(const Image& hr);

/// Extract all fully-inside patches at the given stride, row-major.
PatchGrid unfold(const Image& img, int patch_size, int stride);

/// Pool stride-`candidate_stride` patches of every pyramid level into a
/// candidate database and wire up the colocated index for the
/// stride-`query_stride` query grid on the full-resolution level. The query
/// stride must be a multiple of the candidate stride so every ground-truth
/// patch is itself a candidate.
PatchDatabase build_database(const std::array<Image, 3>& pyramid, int patch_size = 3,
                             int query_stride = 3, int candidate_stride = 1);

/// For every query patch, the candidate minimizing
///   alpha * |g - g_i|^2 + beta * |g - p_i|^2
/// over the whole database. Ties go to the colocated ground-truth candidate
/// when it attains the minimum, otherwise to the lowest (level, row, col).
/// Accelerated mode is exact: it returns the same winner as the brute scan.
BuddyAssignment buddy_search(const PatchGrid& queries, const PatchGrid& gts,
                             const PatchDatabase& db, const BuddySearchConfig& cfg);

nlohmann::json assignment_to_json(const BuddyAssignment& assignment, const PatchDatabase& db);

}  // namespace buddykit
