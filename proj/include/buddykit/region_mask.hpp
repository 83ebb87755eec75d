#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "buddykit/image.hpp"

namespace buddykit {

/// Texture/flat split based on windowed intensity spread: a pixel is marked
/// textured when the population standard deviation of the k x k window around
/// it reaches `delta`.
struct MaskConfig {
  int k = 11;
  double delta = 0.025;
};

struct RegionMask {
  int height = 0;
  int width = 0;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, 1> values;  // 0 or 1, row-major

  std::uint8_t at(int r, int c) const {
    return values[static_cast<Eigen::Index>(r) * width + c];
  }
};

/// Per-pixel population std of the k x k window centered on the pixel,
/// computed on luma with symmetric (edge-inclusive) reflection padding.
/// Uses summed-area tables of I and I^2 in double precision.
Eigen::ArrayXd window_std(const Image& img, int k);

/// Threshold window_std at cfg.delta (>= marks textured).
RegionMask compute_mask(const Image& img, const MaskConfig& cfg);

/// Per-pixel product of image and mask across all channels.
Image apply_mask(const Image& img, const RegionMask& mask);

/// Mask rendered as a 1-channel image of 0s and 1s, ready for save_png
/// (0 or 255 bytes on disk).
Image mask_to_image(const RegionMask& mask);

}  // namespace buddykit
