#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

#include "buddykit/image.hpp"
#include "buddykit/patch.hpp"

#include <nlohmann/json_fwd.hpp>

namespace buddykit {

/// Generator loss weights; defaults are the production setting.
struct LossWeights {
  double lambda_bb = 0.1;
  double lambda_bp = 1.0;
  double lambda_p = 1.0;
  double lambda_g = 0.005;
};

/// Deterministic fixed-tree pairwise reduction. All loss means go through
/// this so results do not depend on traversal or thread count.
double pairwise_sum(const double* values, Eigen::Index n);

/// Mean of |a - b| over all elements.
double mean_absolute_error(const Image& a, const Image& b);

/// Mean over every query patch element of |p_i - g*_i|, with g*_i taken from
/// the assignment. Resolution independent by construction.
double best_buddy_loss(const PatchGrid& queries, const BuddyAssignment& assignment,
                       const PatchDatabase& db);

/// Mean |S(sr, s) - lr| where S is the linear (unclamped) bicubic downscale.
double back_projection_loss(const Image& sr, const Image& lr, int scale);

/// Multi-layer feature map interface for the perceptual loss. Every layer
/// maps an image to a finite flat feature array.
class FeatureExtractor {
 public:
  struct Layer {
    std::string label;
    double coefficient = 1.0;
  };

  virtual ~FeatureExtractor() = default;
  virtual const std::vector<Layer>& layers() const = 0;
  virtual Eigen::ArrayXd features(size_t layer, const Image& img) const = 0;
};

/// Layer labels and coefficients of the standard VGG-19 setting
/// (conv3_4, conv4_4, conv5_4 at 1/8, 1/4, 1/2). Shipped as configuration
/// only; plugging in actual network features is up to the caller.
extern const std::vector<FeatureExtractor::Layer> kVggPerceptualLayers;

/// Identity features: each layer returns the flattened image. Useful for
/// testing and as a pixel-space stand-in.
class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(std::vector<Layer> layers = {{"identity", 1.0}});
  const std::vector<Layer>& layers() const override { return layers_; }
  Eigen::ArrayXd features(size_t layer, const Image& img) const override;

 private:
  std::vector<Layer> layers_;
};

/// Sum over layers of coefficient * mean |phi(sr) - phi(hr)|.
double perceptual_loss(const Image& sr, const Image& hr, const FeatureExtractor& extractor);

/// Raw discriminator outputs for a batch of real and generated samples.
struct LogitBatch {
  Eigen::ArrayXd real_logits;
  Eigen::ArrayXd fake_logits;
};

/// Relativistic-average discriminator / generator losses. Log arguments are
/// clamped below at 1e-12 so saturated logits stay finite.
double ragan_d_loss(const LogitBatch& batch);
double ragan_g_loss(const LogitBatch& batch);

struct LossParts {
  double bb = 0.0;
  double bp = 0.0;
  double perceptual = 0.0;
  double ragan_g = 0.0;
};

double total_generator_loss(const LossParts& parts, const LossWeights& weights);

nlohmann::json loss_report_json(const LossParts& parts, const LossWeights& weights);

}  // namespace buddykit
