#include "buddykit/losses.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace buddykit {

double pairwise_sum(const double* values, Eigen::Index n) {
  if (n <= 8) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += values[i];
    return acc;
  }
  const Eigen::Index half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

namespace {

double mean_abs_diff(const double* a, const double* b, Eigen::Index n) {
  Eigen::ArrayXd diffs(n);
  for (Eigen::Index i = 0; i < n; ++i) diffs[i] = std::abs(a[i] - b[i]);
  return pairwise_sum(diffs.data(), n) / static_cast<double>(n);
}

}  // namespace

double mean_absolute_error(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mean_absolute_error: shape mismatch");
  return mean_abs_diff(a.data.data(), b.data.data(), a.size());
}

double best_buddy_loss(const PatchGrid& queries, const BuddyAssignment& assignment,
                       const PatchDatabase& db) {
  const Eigen::Index n = queries.count();
  if (static_cast<Eigen::Index>(assignment.records.size()) != n)
    throw std::invalid_argument("best_buddy_loss: assignment does not match query grid");
  if (queries.patches.cols() != db.candidates.cols())
    throw std::invalid_argument("best_buddy_loss: query and database patch shapes differ");

  const Eigen::Index dim = queries.patches.cols();
  Eigen::ArrayXd diffs(n * dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const BuddyRecord& rec = assignment.records[static_cast<size_t>(i)];
    if (rec.query_index != i || rec.buddy_index < 0 || rec.buddy_index >= db.count())
      throw std::invalid_argument("best_buddy_loss: assignment does not match query grid");
    const double* p = queries.patches.row(i).data();
    const double* g = db.candidates.row(rec.buddy_index).data();
    for (Eigen::Index k = 0; k < dim; ++k) diffs[i * dim + k] = std::abs(p[k] - g[k]);
  }
  return pairwise_sum(diffs.data(), diffs.size()) / static_cast<double>(diffs.size());
}

double back_projection_loss(const Image& sr, const Image& lr, int scale) {
  if (scale < 1) throw std::invalid_argument("back_projection_loss: scale must be >= 1");
  if (sr.height != lr.height * scale || sr.width != lr.width * scale ||
      sr.channels != lr.channels)
    throw std::invalid_argument("back_projection_loss: sr dims must equal lr dims times scale");
  const Image projected =
      bicubic_resample_linear(sr, ResampleSpec{scale, ResampleDirection::down, true});
  return mean_abs_diff(projected.data.data(), lr.data.data(), projected.size());
}

const std::vector<FeatureExtractor::Layer> kVggPerceptualLayers = {
    {"conv3_4", 1.0 / 8.0}, {"conv4_4", 1.0 / 4.0}, {"conv5_4", 1.0 / 2.0}};

IdentityExtractor::IdentityExtractor(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("IdentityExtractor: need at least one layer");
}

Eigen::ArrayXd IdentityExtractor::features(size_t layer, const Image& img) const {
  if (layer >= layers_.size()) throw std::invalid_argument("IdentityExtractor: bad layer index");
  return img.data;
}

double perceptual_loss(const Image& sr, const Image& hr, const FeatureExtractor& extractor) {
  if (!sr.same_shape(hr)) throw std::invalid_argument("perceptual_loss: shape mismatch");
  double total = 0.0;
  const auto& layers = extractor.layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    const Eigen::ArrayXd fs = extractor.features(i, sr);
    const Eigen::ArrayXd fh = extractor.features(i, hr);
    if (fs.size() != fh.size() || fs.size() == 0)
      throw std::invalid_argument("perceptual_loss: feature shapes differ at layer " +
                                  layers[i].label);
    if (!fs.isFinite().all() || !fh.isFinite().all())
      throw std::invalid_argument("perceptual_loss: non-finite features at layer " +
                                  layers[i].label);
    total += layers[i].coefficient * mean_abs_diff(fs.data(), fh.data(), fs.size());
  }
  return total;
}

namespace {

constexpr double kLogFloor = 1e-12;

inline double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void validate_logits(const LogitBatch& batch) {
  if (batch.real_logits.size() == 0 || batch.fake_logits.size() == 0)
    throw std::invalid_argument("ragan loss: empty logit batch");
  if (!batch.real_logits.isFinite().all() || !batch.fake_logits.isFinite().all())
    throw std::invalid_argument("ragan loss: non-finite logits");
}

double batch_mean(const Eigen::ArrayXd& v) {
  return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

// -E[log sigmoid(x - shift)] over a logit array.
double neg_mean_log_sigmoid(const Eigen::ArrayXd& logits, double shift) {
  Eigen::ArrayXd terms(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    terms[i] = safe_log(sigmoid(logits[i] - shift));
  return -batch_mean(terms);
}

// -E[log(1 - sigmoid(x - shift))].
double neg_mean_log_one_minus_sigmoid(const Eigen::ArrayXd& logits, double shift) {
  Eigen::ArrayXd terms(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    terms[i] = safe_log(1.0 - sigmoid(logits[i] - shift));
  return -batch_mean(terms);
}

}  // namespace

double ragan_d_loss(const LogitBatch& batch) {
  validate_logits(batch);
  const double mean_real = batch_mean(batch.real_logits);
  const double mean_fake = batch_mean(batch.fake_logits);
  return neg_mean_log_sigmoid(batch.real_logits, mean_fake) +
         neg_mean_log_one_minus_sigmoid(batch.fake_logits, mean_real);
}

double ragan_g_loss(const LogitBatch& batch) {
  validate_logits(batch);
  const double mean_real = batch_mean(batch.real_logits);
  const double mean_fake = batch_mean(batch.fake_logits);
  return neg_mean_log_one_minus_sigmoid(batch.real_logits, mean_fake) +
         neg_mean_log_sigmoid(batch.fake_logits, mean_real);
}

double total_generator_loss(const LossParts& parts, const LossWeights& weights) {
  if (!std::isfinite(parts.bb) || !std::isfinite(parts.bp) || !std::isfinite(parts.perceptual) ||
      !std::isfinite(parts.ragan_g))
    throw std::invalid_argument("total_generator_loss: non-finite component");
  return weights.lambda_bb * parts.bb + weights.lambda_bp * parts.bp +
         weights.lambda_p * parts.perceptual + weights.lambda_g * parts.ragan_g;
}

nlohmann::json loss_report_json(const LossParts& parts, const LossWeights& weights) {
  return {{"bb", parts.bb},
          {"bp", parts.bp},
          {"perceptual", parts.perceptual},
          {"ragan_g", parts.ragan_g},
          {"total", total_generator_loss(parts, weights)},
          {"weights",
           {{"lambda_bb", weights.lambda_bb},
            {"lambda_bp", weights.lambda_bp},
            {"lambda_p", weights.lambda_p},
            {"lambda_g", weights.lambda_g}}}};
}

}  // namespace buddykit
