#include "buddykit/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace buddykit {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("load_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("load_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("load_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_png: failed to decode " + path);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_png: only grayscale and RGB PNGs are supported");
  }
  if (bit_depth != 8 && bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_png: only 8- and 16-bit PNGs are supported");
  }

  if (bit_depth == 16) png_set_swap(png);  // libpng reads 16-bit big-endian
  png_read_update_info(png, info);

  const int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;
  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> raw(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + r * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(height), static_cast<int>(width), channels);
  const Eigen::Index n = img.size();
  if (bit_depth == 8) {
    for (Eigen::Index i = 0; i < n; ++i) img.data[i] = raw[static_cast<size_t>(i)] / 255.0;
  } else {
    const auto* p = reinterpret_cast<const uint16_t*>(raw.data());
    for (Eigen::Index i = 0; i < n; ++i) img.data[i] = p[i] / 65535.0;
  }
  return img;
}

void save_png(const Image& img, const std::string& path) {
  if (img.empty()) throw std::invalid_argument("save_png: empty image");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("save_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("save_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("save_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("save_png: failed to encode " + path);
  }

  png_init_io(png, file.get());
  const int color_type = (img.channels == 3) ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const size_t row_bytes = static_cast<size_t>(img.width) * img.channels;
  std::vector<unsigned char> row(row_bytes);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        const double v = std::clamp(img.at(r, c, ch), 0.0, 1.0);
        row[static_cast<size_t>(c) * img.channels + ch] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace buddykit
