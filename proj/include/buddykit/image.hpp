#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace buddykit {

/// Dense image tensor with row-major storage: element (r, c, ch) lives at
/// data[(r * width + c) * channels + ch]. Intensities are dimensionless and
/// nominally in [0, 1]; intermediate math may leave that range, operations
/// that promise clamped output say so.
template <typename Scalar>
struct ImageT {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  int height = 0;
  int width = 0;
  int channels = 0;
  Array data;

  ImageT() = default;
  ImageT(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(Array::Zero(static_cast<Eigen::Index>(h) * w * c)) {
    if (h <= 0 || w <= 0 || (c != 1 && c != 3))
      throw std::invalid_argument("ImageT: dimensions must be positive and channels 1 or 3");
  }

  static ImageT constant(int h, int w, int c, Scalar value) {
    ImageT img(h, w, c);
    img.data.setConstant(value);
    return img;
  }

  Eigen::Index size() const { return data.size(); }
  bool empty() const { return data.size() == 0; }

  Scalar& at(int r, int c, int ch = 0) {
    return data[(static_cast<Eigen::Index>(r) * width + c) * channels + ch];
  }
  Scalar at(int r, int c, int ch = 0) const {
    return data[(static_cast<Eigen::Index>(r) * width + c) * channels + ch];
  }

  bool same_shape(const ImageT& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

using Image = ImageT<double>;

enum class ResampleDirection { down, up };

/// Integer-factor bicubic rescale. `antialias` stretches the kernel support
/// by the factor and only applies on the down direction.
struct ResampleSpec {
  int factor = 1;
  ResampleDirection direction = ResampleDirection::down;
  bool antialias = true;
};

namespace detail {

/// Cubic convolution kernel, Catmull-Rom variant (a = -0.5).
inline double cubic_kernel(double x) {
  x = std::abs(x);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

/// Contribution taps of one output coordinate along one axis.
/// Indices may run off the axis; gather clamps them (edge replication).
/// Weights are normalized to sum to 1.
struct AxisTaps {
  int first = 0;
  std::vector<double> weights;
};

/// Continuous-to-discrete mapping: src = (dst + 0.5) * in/out - 0.5,
/// kernel stretched by the scale factor when `stretch` is set.
inline AxisTaps axis_taps(int dst, double scale, bool stretch) {
  const double src = (dst + 0.5) * scale - 0.5;
  const double kscale = (stretch && scale > 1.0) ? scale : 1.0;
  const double radius = 2.0 * kscale;
  AxisTaps taps;
  taps.first = static_cast<int>(std::ceil(src - radius));
  const int last = static_cast<int>(std::floor(src + radius));
  taps.weights.resize(static_cast<size_t>(last - taps.first + 1));
  double total = 0.0;
  for (int i = taps.first; i <= last; ++i) {
    const double w = cubic_kernel((src - i) / kscale);
    taps.weights[static_cast<size_t>(i - taps.first)] = w;
    total += w;
  }
  for (double& w : taps.weights) w /= total;
  return taps;
}

template <typename Scalar>
ImageT<Scalar> resample_axis_width(const ImageT<Scalar>& img, int out_w, double scale, bool stretch) {
  ImageT<Scalar> out(img.height, out_w, img.channels);
  std::vector<AxisTaps> taps(static_cast<size_t>(out_w));
  for (int c = 0; c < out_w; ++c) taps[static_cast<size_t>(c)] = axis_taps(c, scale, stretch);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const AxisTaps& t = taps[static_cast<size_t>(c)];
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (size_t k = 0; k < t.weights.size(); ++k) {
          const int src = std::clamp(t.first + static_cast<int>(k), 0, img.width - 1);
          acc += t.weights[k] * static_cast<double>(img.at(r, src, ch));
        }
        out.at(r, c, ch) = static_cast<Scalar>(acc);
      }
    }
  }
  return out;
}

template <typename Scalar>
ImageT<Scalar> resample_axis_height(const ImageT<Scalar>& img, int out_h, double scale, bool stretch) {
  ImageT<Scalar> out(out_h, img.width, img.channels);
  std::vector<AxisTaps> taps(static_cast<size_t>(out_h));
  for (int r = 0; r < out_h; ++r) taps[static_cast<size_t>(r)] = axis_taps(r, scale, stretch);
  for (int r = 0; r < out_h; ++r) {
    const AxisTaps& t = taps[static_cast<size_t>(r)];
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (size_t k = 0; k < t.weights.size(); ++k) {
          const int src = std::clamp(t.first + static_cast<int>(k), 0, img.height - 1);
          acc += t.weights[k] * static_cast<double>(img.at(src, c, ch));
        }
        out.at(r, c, ch) = static_cast<Scalar>(acc);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Separable bicubic rescale without range clamping. This is the linear
/// operator form: out-of-range intensities pass through untouched, which loss
/// math on synthetic tensors relies on.
template <typename Scalar>
ImageT<Scalar> bicubic_resample_linear(const ImageT<Scalar>& img, const ResampleSpec& spec) {
  if (img.empty()) throw std::invalid_argument("bicubic_resample: empty image");
  if (spec.factor < 1) throw std::invalid_argument("bicubic_resample: factor must be >= 1");
  if (spec.factor == 1) return img;

  int out_h = 0, out_w = 0;
  double scale = 0.0;
  bool stretch = false;
  if (spec.direction == ResampleDirection::down) {
    if (img.height % spec.factor != 0 || img.width % spec.factor != 0)
      throw std::invalid_argument("bicubic_resample: downscale requires height and width divisible by factor");
    out_h = img.height / spec.factor;
    out_w = img.width / spec.factor;
    scale = static_cast<double>(spec.factor);
    stretch = spec.antialias;
  } else {
    out_h = img.height * spec.factor;
    out_w = img.width * spec.factor;
    scale = 1.0 / static_cast<double>(spec.factor);
    stretch = false;
  }
  ImageT<Scalar> tmp = detail::resample_axis_width(img, out_w, scale, stretch);
  return detail::resample_axis_height(tmp, out_h, scale, stretch);
}

/// Bicubic rescale with output clamped to [0, 1].
template <typename Scalar>
ImageT<Scalar> bicubic_resample(const ImageT<Scalar>& img, const ResampleSpec& spec) {
  ImageT<Scalar> out = bicubic_resample_linear(img, spec);
  out.data = out.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  return out;
}

/// Rec. 601 luma. 3-channel input collapses to one channel, 1-channel input
/// is returned unchanged.
template <typename Scalar>
ImageT<Scalar> to_luma(const ImageT<Scalar>& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw std::invalid_argument("to_luma: unsupported channel count");
  ImageT<Scalar> out(img.height, img.width, 1);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      out.at(r, c) = static_cast<Scalar>(0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) +
                                         0.114 * img.at(r, c, 2));
  return out;
}

/// Center crop to the largest size whose height and width are multiples of
/// `multiple`. The top-left offset is additionally floored to a multiple of
/// `offset_multiple` so a paired low-resolution image can be cropped in sync.
template <typename Scalar>
ImageT<Scalar> crop_to_multiple(const ImageT<Scalar>& img, int multiple, int offset_multiple = 1) {
  if (multiple < 1 || offset_multiple < 1)
    throw std::invalid_argument("crop_to_multiple: multiples must be >= 1");
  const int out_h = (img.height / multiple) * multiple;
  const int out_w = (img.width / multiple) * multiple;
  if (out_h == 0 || out_w == 0)
    throw std::invalid_argument("crop_to_multiple: image smaller than requested multiple");
  const int top = ((img.height - out_h) / 2) / offset_multiple * offset_multiple;
  const int left = ((img.width - out_w) / 2) / offset_multiple * offset_multiple;
  ImageT<Scalar> out(out_h, out_w, img.channels);
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c)
      for (int ch = 0; ch < img.channels; ++ch)
        out.at(r, c, ch) = img.at(top + r, left + c, ch);
  return out;
}

}  // namespace buddykit
