#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace buddykit {

/// One training example of the 2D-to-1D toy problem: y lies on the noisy
/// Swiss roll, x is its linear downsampling (y1 + y2) / 2.
struct SwissRollSample {
  Eigen::Vector2d y;
  double x = 0.0;
};

/// Noisy Swiss-roll draw: t ~ U[1.5*pi, 4.5*pi],
/// y = 0.5 * (t cos t, t sin t) + N(0, 0.05^2) per coordinate.
/// Fully deterministic per seed.
std::vector<SwissRollSample> gen_swiss_roll(int n, std::uint64_t seed);

/// Parametric Swiss-roll curve 0.5 * (t cos t, t sin t).
Eigen::Vector2d swiss_roll_point(double t);

/// Euclidean distance from `p` to the noiseless roll, minimized over t by
/// dense sampling (1e4 points) plus golden-section refinement.
double swiss_roll_curve_distance(const Eigen::Vector2d& p);

/// 1 -> 64 -> 64 -> 2 regressor, ReLU hidden layers, linear output, double
/// precision throughout.
struct MlpModel {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  static MlpModel init(std::uint64_t seed);

  Eigen::Vector2d forward(double x) const;
  Eigen::Matrix2Xd forward_batch(const Eigen::RowVectorXd& xs) const;
  bool finite() const;
};

struct MlpGradients {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
};

/// Reverse-mode gradients of a scalar loss with respect to all parameters,
/// given dLoss/dOutput for a batch of inputs.
MlpGradients mlp_grad(const MlpModel& model, const Eigen::RowVectorXd& xs,
                      const Eigen::Matrix2Xd& dloss_dout);

enum class ToyLoss { mae, mse, bbl };

std::string to_string(ToyLoss kind);

struct ToyTrainConfig {
  ToyLoss loss_kind = ToyLoss::mae;
  int n_train = 4096;
  int steps = 5000;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double alpha = 1.0;  // best-buddy anchor weight
  double beta = 1.0;   // best-buddy estimate weight
};

/// Index of the target minimizing alpha*|g - g_i|^2 + beta*|g - y_hat|^2;
/// ties go to the lowest index.
Eigen::Index toy_buddy_index(const Eigen::Matrix2Xd& targets, const Eigen::Vector2d& g_i,
                             const Eigen::Vector2d& y_hat, double alpha, double beta);

Eigen::Vector2d toy_buddy(const Eigen::Matrix2Xd& targets, const Eigen::Vector2d& g_i,
                          const Eigen::Vector2d& y_hat, double alpha, double beta);

/// Mini-batch Adam training (beta1 = 0.9, beta2 = 0.999). For the bbl loss
/// every step re-selects per-sample buddies against the full training target
/// set and applies L1 toward the buddy. Throws on divergence.
MlpModel train_toy(const ToyTrainConfig& cfg);

/// The evaluation grid x in {-7, -6, ..., 7}.
std::vector<double> toy_grid();

struct ManifoldFitStats {
  struct GridPoint {
    double x = 0.0;
    double y1 = 0.0;
    double y2 = 0.0;
    double curve_distance = 0.0;
    double lr_residual = 0.0;  // |(y1 + y2)/2 - x|
  };
  std::vector<GridPoint> points;
  double mean_dist = 0.0;
  double max_dist = 0.0;
};

ManifoldFitStats eval_manifold_fit(const MlpModel& model,
                                   const std::vector<double>& grid = toy_grid());

/// Write toy_estimates.csv, toy_plot.svg and toy_stats.json under out_dir.
/// Output bytes are deterministic for identical inputs.
void export_toy_outputs(const std::vector<std::pair<std::string, ManifoldFitStats>>& runs,
                        const std::vector<SwissRollSample>& train_data,
                        const std::string& out_dir);

}  // namespace buddykit
