#pragma once

#include <string>

#include "buddykit/image.hpp"

namespace buddykit {

/// Load an 8- or 16-bit grayscale/RGB PNG. Intensities are normalized by 255
/// (or 65535). Palette, alpha and other exotic color types are rejected.
Image load_png(const std::string& path);

/// Save as 8-bit PNG. Values are clamped to [0, 1] and quantized with
/// round-half-away-from-zero.
void save_png(const Image& img, const std::string& path);

}  // namespace buddykit
