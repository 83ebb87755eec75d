#pragma once

// Shared test utilities: deterministic random images and independent
// reference implementations used as oracles. These deliberately do not call
// into the code paths they are checking.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "buddykit/image.hpp"

namespace testkit {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline buddykit::Image random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  buddykit::Image img(h, w, c);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data[i] = uniform01(rng);
  return img;
}

// Catmull-Rom weight, written independently of the library.
inline double ref_cubic(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
  if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
  return 0.0;
}

// Normalized taps for one axis position: src = (dst + 0.5) * scale - 0.5,
// kernel stretched by `scale` when antialiasing a downscale.
inline void ref_axis_weights(int dst, double scale, bool stretch, std::vector<double>& w,
                             int& first) {
  const double src = (dst + 0.5) * scale - 0.5;
  const double ks = (stretch && scale > 1.0) ? scale : 1.0;
  first = static_cast<int>(std::ceil(src - 2.0 * ks));
  const int last = static_cast<int>(std::floor(src + 2.0 * ks));
  w.assign(static_cast<size_t>(last - first + 1), 0.0);
  double total = 0.0;
  for (int i = first; i <= last; ++i) {
    w[static_cast<size_t>(i - first)] = ref_cubic((src - i) / ks);
    total += w[static_cast<size_t>(i - first)];
  }
  for (double& v : w) v /= total;
}

// Direct 2D evaluation of the separable cubic convolution at every output
// pixel, with edge-clamped sampling. No intermediate passes, no clamping of
// intensities.
inline buddykit::Image ref_resample(const buddykit::Image& img, int factor, bool down,
                                    bool antialias) {
  const int out_h = down ? img.height / factor : img.height * factor;
  const int out_w = down ? img.width / factor : img.width * factor;
  const double scale = down ? static_cast<double>(factor) : 1.0 / factor;
  buddykit::Image out(out_h, out_w, img.channels);
  std::vector<double> wr, wc;
  int fr = 0, fc = 0;
  for (int r = 0; r < out_h; ++r) {
    ref_axis_weights(r, scale, down && antialias, wr, fr);
    for (int c = 0; c < out_w; ++c) {
      ref_axis_weights(c, scale, down && antialias, wc, fc);
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (size_t i = 0; i < wr.size(); ++i) {
          const int sr = std::clamp(fr + static_cast<int>(i), 0, img.height - 1);
          for (size_t j = 0; j < wc.size(); ++j) {
            const int sc = std::clamp(fc + static_cast<int>(j), 0, img.width - 1);
            acc += wr[i] * wc[j] * img.at(sr, sc, ch);
          }
        }
        out.at(r, c, ch) = acc;
      }
    }
  }
  return out;
}

inline double max_abs_diff(const buddykit::Image& a, const buddykit::Image& b) {
  return (a.data - b.data).abs().maxCoeff();
}

}  // namespace testkit
