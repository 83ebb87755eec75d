#include "buddykit/region_mask.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace buddykit {

namespace {

// Symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline int reflect_index(int i, int n) {
  if (i < 0) return -1 - i;
  if (i >= n) return 2 * n - 1 - i;
  return i;
}

}  // namespace

Eigen::ArrayXd window_std(const Image& img, int k) {
  if (img.empty()) throw std::invalid_argument("window_std: empty image");
  if (k < 3 || k % 2 == 0) throw std::invalid_argument("window_std: k must be odd and >= 3");
  if (k > 2 * std::min(img.height, img.width))
    throw std::invalid_argument("window_std: k larger than twice the smaller image side");

  const Image luma = to_luma(img);
  const int h = img.height;
  const int w = img.width;
  const int pad = k / 2;
  const int ph = h + 2 * pad;
  const int pw = w + 2 * pad;

  // Summed-area tables with a zero border row/column.
  Eigen::ArrayXXd sat(ph + 1, pw + 1);
  Eigen::ArrayXXd sat2(ph + 1, pw + 1);
  sat.row(0).setZero();
  sat2.row(0).setZero();
  for (int r = 0; r < ph; ++r) {
    sat(r + 1, 0) = 0.0;
    sat2(r + 1, 0) = 0.0;
    const int sr = reflect_index(r - pad, h);
    double run = 0.0, run2 = 0.0;
    for (int c = 0; c < pw; ++c) {
      const double v = luma.at(sr, reflect_index(c - pad, w));
      run += v;
      run2 += v * v;
      sat(r + 1, c + 1) = sat(r, c + 1) + run;
      sat2(r + 1, c + 1) = sat2(r, c + 1) + run2;
    }
  }

  const double inv_area = 1.0 / (static_cast<double>(k) * k);
  Eigen::ArrayXd out(static_cast<Eigen::Index>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Window [r, r+k) x [c, c+k) in padded coordinates.
      const double s1 = sat(r + k, c + k) - sat(r, c + k) - sat(r + k, c) + sat(r, c);
      const double s2 = sat2(r + k, c + k) - sat2(r, c + k) - sat2(r + k, c) + sat2(r, c);
      const double mean = s1 * inv_area;
      const double var = std::max(0.0, s2 * inv_area - mean * mean);
      out[static_cast<Eigen::Index>(r) * w + c] = std::sqrt(var);
    }
  }
  return out;
}

RegionMask compute_mask(const Image& img, const MaskConfig& cfg) {
  if (cfg.delta < 0.0) throw std::invalid_argument("compute_mask: delta must be >= 0");
  const Eigen::ArrayXd stds = window_std(img, cfg.k);
  RegionMask mask;
  mask.height = img.height;
  mask.width = img.width;
  mask.values = (stds >= cfg.delta).cast<std::uint8_t>();
  return mask;
}

Image apply_mask(const Image& img, const RegionMask& mask) {
  if (img.height != mask.height || img.width != mask.width)
    throw std::invalid_argument("apply_mask: dimension mismatch");
  Image out = img;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      if (mask.at(r, c) == 0)
        for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = 0.0;
  return out;
}

Image mask_to_image(const RegionMask& mask) {
  Image out(mask.height, mask.width, 1);
  out.data = mask.values.cast<double>();
  return out;
}

}  // namespace buddykit
