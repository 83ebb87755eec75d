#include "buddykit/patch.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace buddykit {

std::array<Image, 3> build_pyramid(const Image& hr) {
  if (hr.empty()) throw std::invalid_argument("build_pyramid: empty image");
  if (hr.height % 4 != 0 || hr.width % 4 != 0)
    throw std::invalid_argument("build_pyramid: height and width must be divisible by 4");
  ResampleSpec down2{2, ResampleDirection::down, true};
  ResampleSpec down4{4, ResampleDirection::down, true};
  return {hr, bicubic_resample(hr, down2), bicubic_resample(hr, down4)};
}

PatchGrid unfold(const Image& img, int patch_size, int stride) {
  if (patch_size < 1 || stride < 1) throw std::invalid_argument("unfold: patch_size and stride must be >= 1");
  if (img.height < patch_size || img.width < patch_size)
    throw std::invalid_argument("unfold: patch larger than image");

  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.stride = stride;
  grid.channels = img.channels;
  grid.grid_rows = (img.height - patch_size) / stride + 1;
  grid.grid_cols = (img.width - patch_size) / stride + 1;

  const Eigen::Index n = static_cast<Eigen::Index>(grid.grid_rows) * grid.grid_cols;
  const Eigen::Index dim = static_cast<Eigen::Index>(patch_size) * patch_size * img.channels;
  grid.patches.resize(n, dim);
  grid.origins.reserve(static_cast<size_t>(n));

  Eigen::Index idx = 0;
  for (int gr = 0; gr < grid.grid_rows; ++gr) {
    for (int gc = 0; gc < grid.grid_cols; ++gc, ++idx) {
      const int r0 = gr * stride;
      const int c0 = gc * stride;
      grid.origins.emplace_back(r0, c0);
      double* dst = grid.patches.row(idx).data();
      for (int pr = 0; pr < patch_size; ++pr)
        for (int pc = 0; pc < patch_size; ++pc)
          for (int ch = 0; ch < img.channels; ++ch)
            *dst++ = img.at(r0 + pr, c0 + pc, ch);
    }
  }
  return grid;
}

PatchDatabase build_database(const std::array<Image, 3>& pyramid, int patch_size,
                             int query_stride, int candidate_stride) {
  static constexpr int kLevelFactors[3] = {1, 2, 4};
  if (candidate_stride < 1 || query_stride < 1 || query_stride % candidate_stride != 0)
    throw std::invalid_argument(
        "build_database: query stride must be a positive multiple of the candidate stride");

  PatchDatabase db;
  db.patch_size = patch_size;
  db.channels = pyramid[0].channels;
  db.query_stride = query_stride;

  std::array<PatchGrid, 3> level_grids;
  Eigen::Index total = 0;
  for (int l = 0; l < 3; ++l) {
    if (pyramid[static_cast<size_t>(l)].channels != db.channels)
      throw std::invalid_argument("build_database: pyramid levels disagree on channel count");
    level_grids[static_cast<size_t>(l)] =
        unfold(pyramid[static_cast<size_t>(l)], patch_size, candidate_stride);
    total += level_grids[static_cast<size_t>(l)].count();
  }

  const Eigen::Index dim = level_grids[0].patches.cols();
  db.candidates.resize(total, dim);
  db.provenance.reserve(static_cast<size_t>(total));
  Eigen::Index offset = 0;
  for (int l = 0; l < 3; ++l) {
    const PatchGrid& g = level_grids[static_cast<size_t>(l)];
    db.candidates.middleRows(offset, g.count()) = g.patches;
    for (const auto& [r, c] : g.origins)
      db.provenance.push_back({kLevelFactors[l], r, c});
    offset += g.count();
  }

  // Query grid on the full-resolution level. The level-1 candidate at origin
  // (r, c) has index (r / candidate_stride) * cols + c / candidate_stride.
  const Image& full = pyramid[0];
  const int q_rows = (full.height - patch_size) / query_stride + 1;
  const int q_cols = (full.width - patch_size) / query_stride + 1;
  const int cand_cols = level_grids[0].grid_cols;
  const int ratio = query_stride / candidate_stride;
  db.colocated_index.reserve(static_cast<size_t>(q_rows) * q_cols);
  for (int gr = 0; gr < q_rows; ++gr)
    for (int gc = 0; gc < q_cols; ++gc)
      db.colocated_index.push_back(static_cast<Eigen::Index>(gr) * ratio * cand_cols + gc * ratio);

  db.means = db.candidates.rowwise().mean().array();
  db.order_by_mean.resize(static_cast<size_t>(total));
  for (Eigen::Index i = 0; i < total; ++i) db.order_by_mean[static_cast<size_t>(i)] = i;
  std::sort(db.order_by_mean.begin(), db.order_by_mean.end(),
            [&](Eigen::Index a, Eigen::Index b) {
              if (db.means[a] != db.means[b]) return db.means[a] < db.means[b];
              return a < b;
            });
  db.sorted_means.resize(total);
  for (Eigen::Index i = 0; i < total; ++i)
    db.sorted_means[i] = db.means[db.order_by_mean[static_cast<size_t>(i)]];

  return db;
}

namespace {

// Squared distances of candidate g to the anchor and the estimate, fused.
inline void anchor_distances(const double* g, const double* gi, const double* p, Eigen::Index dim,
                             double& d_gt, double& d_est) {
  double a = 0.0, b = 0.0;
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double da = g[k] - gi[k];
    const double db = g[k] - p[k];
    a += da * da;
    b += db * db;
  }
  d_gt = a;
  d_est = b;
}

inline double squared_distance(const double* g, const double* m, Eigen::Index dim) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double d = g[k] - m[k];
    acc += d * d;
  }
  return acc;
}

// Early-abandon variant: bails out once the partial sum strictly exceeds
// `bound`, so candidates that exactly tie the incumbent are never dropped.
inline double squared_distance_abandon(const double* g, const double* m, Eigen::Index dim,
                                       double bound) {
  double acc = 0.0;
  Eigen::Index k = 0;
  constexpr Eigen::Index kBlock = 8;
  for (; k + kBlock <= dim; k += kBlock) {
    for (Eigen::Index j = k; j < k + kBlock; ++j) {
      const double d = g[j] - m[j];
      acc += d * d;
    }
    if (acc > bound) return acc;
  }
  for (; k < dim; ++k) {
    const double d = g[k] - m[k];
    acc += d * d;
  }
  return acc;
}

BuddyRecord search_one_brute(const PatchGrid& queries, const PatchGrid& gts,
                             const PatchDatabase& db, const BuddySearchConfig& cfg,
                             Eigen::Index qi) {
  const Eigen::Index dim = db.candidates.cols();
  const Eigen::Index n = db.count();
  const double* gi = gts.patches.row(qi).data();
  const double* p = queries.patches.row(qi).data();
  const Eigen::Index colo = db.colocated_index[static_cast<size_t>(qi)];

  double best_obj = std::numeric_limits<double>::infinity();
  Eigen::Index best_idx = 0;
  double colo_obj = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d_gt, d_est;
    anchor_distances(db.candidates.row(j).data(), gi, p, dim, d_gt, d_est);
    const double obj = cfg.alpha * d_gt + cfg.beta * d_est;
    if (j == colo) colo_obj = obj;
    if (obj < best_obj) {
      best_obj = obj;
      best_idx = j;
    }
  }
  const Eigen::Index winner = (colo_obj == best_obj) ? colo : best_idx;

  BuddyRecord rec;
  rec.query_index = qi;
  rec.buddy_index = winner;
  anchor_distances(db.candidates.row(winner).data(), gi, p, dim, rec.dist_to_gt, rec.dist_to_est);
  rec.objective = cfg.alpha * rec.dist_to_gt + cfg.beta * rec.dist_to_est;
  return rec;
}

// Exact accelerated search. The objective rewrites as
//   alpha*|g - g_i|^2 + beta*|g - p|^2 = (alpha+beta)*|g - m|^2 + const,
// with m the anchor blend (alpha*g_i + beta*p)/(alpha+beta), so the winner is
// the nearest neighbor of m. Candidates are visited outward from m's mean
// using the bound |g - m|^2 >= dim * (mean(g) - mean(m))^2; per-candidate
// distance sums abandon once they exceed the incumbent.
BuddyRecord search_one_accelerated(const PatchGrid& queries, const PatchGrid& gts,
                                   const PatchDatabase& db, const BuddySearchConfig& cfg,
                                   Eigen::Index qi, Eigen::VectorXd& blend) {
  const Eigen::Index dim = db.candidates.cols();
  const Eigen::Index n = db.count();
  const double* gi = gts.patches.row(qi).data();
  const double* p = queries.patches.row(qi).data();
  const Eigen::Index colo = db.colocated_index[static_cast<size_t>(qi)];
  const double inv_total = 1.0 / (cfg.alpha + cfg.beta);

  for (Eigen::Index k = 0; k < dim; ++k)
    blend[k] = (cfg.alpha * gi[k] + cfg.beta * p[k]) * inv_total;
  const double* m = blend.data();
  const double m_mean = blend.mean();
  const double dimd = static_cast<double>(dim);

  const double colo_dist = squared_distance(db.candidates.row(colo).data(), m, dim);
  double best_dist = colo_dist;
  Eigen::Index best_idx = colo;

  // Two-sided expansion over the mean-sorted candidate order.
  const double* sm = db.sorted_means.data();
  Eigen::Index right = std::lower_bound(sm, sm + n, m_mean) - sm;
  Eigen::Index left = right - 1;
  while (left >= 0 || right < n) {
    const double gap_l = (left >= 0) ? m_mean - sm[left] : std::numeric_limits<double>::infinity();
    const double gap_r = (right < n) ? sm[right] - m_mean : std::numeric_limits<double>::infinity();
    Eigen::Index pos;
    double gap;
    if (gap_l <= gap_r) {
      pos = left--;
      gap = gap_l;
    } else {
      pos = right++;
      gap = gap_r;
    }
    // The chosen side has the smaller mean gap, so if its bound already
    // exceeds the incumbent, every unvisited candidate on either side does.
    if (dimd * gap * gap > best_dist) break;
    const Eigen::Index j = db.order_by_mean[static_cast<size_t>(pos)];
    if (j == colo) continue;
    const double dist = squared_distance_abandon(db.candidates.row(j).data(), m, dim, best_dist);
    if (dist < best_dist || (dist == best_dist && j < best_idx)) {
      best_dist = dist;
      best_idx = j;
    }
  }

  const Eigen::Index winner = (colo_dist == best_dist) ? colo : best_idx;

  BuddyRecord rec;
  rec.query_index = qi;
  rec.buddy_index = winner;
  anchor_distances(db.candidates.row(winner).data(), gi, p, dim, rec.dist_to_gt, rec.dist_to_est);
  rec.objective = cfg.alpha * rec.dist_to_gt + cfg.beta * rec.dist_to_est;
  return rec;
}

void validate_search_inputs(const PatchGrid& queries, const PatchGrid& gts,
                            const PatchDatabase& db, const BuddySearchConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.beta < 0.0 || cfg.alpha + cfg.beta <= 0.0)
    throw std::invalid_argument("buddy_search: need alpha, beta >= 0 and alpha + beta > 0");
  if (db.count() == 0) throw std::invalid_argument("buddy_search: empty database");
  if (queries.patch_size != gts.patch_size || queries.channels != gts.channels ||
      queries.count() != gts.count() || queries.origins != gts.origins)
    throw std::invalid_argument("buddy_search: query and ground-truth grids are misaligned");
  if (queries.patch_size != db.patch_size || queries.channels != db.channels)
    throw std::invalid_argument("buddy_search: grid does not match database patch shape");
  if (static_cast<size_t>(queries.count()) != db.colocated_index.size() ||
      queries.stride != db.query_stride)
    throw std::invalid_argument("buddy_search: query grid does not match database query grid");
  for (Eigen::Index i = 0; i < queries.count(); ++i) {
    const auto& prov = db.provenance[static_cast<size_t>(db.colocated_index[static_cast<size_t>(i)])];
    const auto& org = queries.origins[static_cast<size_t>(i)];
    if (prov.level != 1 || prov.row != org.first || prov.col != org.second)
      throw std::invalid_argument("buddy_search: colocated index is inconsistent with query origins");
  }
}

}  // namespace

BuddyAssignment buddy_search(const PatchGrid& queries, const PatchGrid& gts,
                             const PatchDatabase& db, const BuddySearchConfig& cfg) {
  validate_search_inputs(queries, gts, db, cfg);

  const Eigen::Index n = queries.count();
  BuddyAssignment out;
  out.alpha = cfg.alpha;
  out.beta = cfg.beta;
  out.records.resize(static_cast<size_t>(n));

  auto run_range = [&](Eigen::Index begin, Eigen::Index end) {
    Eigen::VectorXd blend(db.candidates.cols());
    for (Eigen::Index i = begin; i < end; ++i) {
      out.records[static_cast<size_t>(i)] =
          (cfg.mode == SearchMode::brute)
              ? search_one_brute(queries, gts, db, cfg, i)
              : search_one_accelerated(queries, gts, db, cfg, i, blend);
    }
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1 || n < 2) {
    run_range(0, n);
  } else {
    // Fixed partition by query index; records are written in place, so the
    // result is identical to the serial run.
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const Eigen::Index begin = std::min<Eigen::Index>(t * chunk, n);
      const Eigen::Index end = std::min<Eigen::Index>(begin + chunk, n);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

nlohmann::json assignment_to_json(const BuddyAssignment& assignment, const PatchDatabase& db) {
  nlohmann::json arr = nlohmann::json::array();
  for (const BuddyRecord& rec : assignment.records) {
    const auto& prov = db.provenance[static_cast<size_t>(rec.buddy_index)];
    arr.push_back({{"query_index", rec.query_index},
                   {"buddy", {{"level", prov.level}, {"row", prov.row}, {"col", prov.col}}},
                   {"objective", rec.objective},
                   {"dist_to_gt", rec.dist_to_gt},
                   {"dist_to_est", rec.dist_to_est}});
  }
  return arr;
}

}  // namespace buddykit
