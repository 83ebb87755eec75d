#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include <png.h>

#include "buddykit/image.hpp"
#include "buddykit/png_io.hpp"
#include "helpers.hpp"

using namespace buddykit;

namespace {

ResampleSpec down_spec(int f, bool antialias = true) {
  return {f, ResampleDirection::down, antialias};
}
ResampleSpec up_spec(int f) { return {f, ResampleDirection::up, false}; }

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("constant image survives resampling") {
  const Image img = Image::constant(64, 64, 1, 0.5);

  const Image down = bicubic_resample_linear(img, down_spec(2));
  CHECK(down.height == 32);
  CHECK(down.width == 32);
  CHECK((down.data - 0.5).abs().maxCoeff() < 1e-9);

  const Image up = bicubic_resample_linear(img, up_spec(2));
  CHECK(up.height == 128);
  CHECK((up.data - 0.5).abs().maxCoeff() < 1e-9);

  const Image clamped = bicubic_resample(img, down_spec(4));
  CHECK((clamped.data - 0.5).abs().maxCoeff() < 1e-9);
}

TEST_CASE("downscaled ramp equals the ramp at output coordinates") {
  const int w = 64;
  Image img(16, w, 1);
  const double a = 0.05, b = 0.9 / (w - 1);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < w; ++c) img.at(r, c) = a + b * c;

  const Image down = bicubic_resample_linear(img, down_spec(2));
  for (int r = 4; r < down.height - 4; ++r) {
    for (int c = 4; c < down.width - 4; ++c) {
      const double src = (c + 0.5) * 2.0 - 0.5;
      CHECK(std::abs(down.at(r, c) - (a + b * src)) <= 1e-6);
    }
  }
}

TEST_CASE("downscale matches the direct convolution reference") {
  const Image img = testkit::random_image(48, 48, 3, 77);
  const Image got = bicubic_resample_linear(img, down_spec(4));
  const Image want = testkit::ref_resample(img, 4, true, true);
  CHECK(testkit::max_abs_diff(got, want) <= 1e-6);
}

TEST_CASE("upscale matches the direct convolution reference") {
  const Image img = testkit::random_image(12, 18, 1, 3);
  const Image got = bicubic_resample_linear(img, up_spec(3));
  const Image want = testkit::ref_resample(img, 3, false, false);
  CHECK(testkit::max_abs_diff(got, want) <= 1e-6);
}

TEST_CASE("resampler agrees with the reference on 100 random images") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const int f = (i % 2 == 0) ? 2 : 4;
    const int h = f * (2 + static_cast<int>(rng() % 8));
    const int w = f * (2 + static_cast<int>(rng() % 8));
    const int c = (i % 3 == 0) ? 3 : 1;
    const Image img = testkit::random_image(h, w, c, rng());
    const Image got = bicubic_resample_linear(img, down_spec(f));
    const Image want = testkit::ref_resample(img, f, true, true);
    REQUIRE(testkit::max_abs_diff(got, want) <= 1e-6);
  }
}

TEST_CASE("resampling is deterministic") {
  const Image img = testkit::random_image(24, 24, 3, 5);
  const Image a = bicubic_resample(img, down_spec(2));
  const Image b = bicubic_resample(img, down_spec(2));
  CHECK((a.data == b.data).all());
}

TEST_CASE("no-antialias downscale plain-samples the kernel") {
  const Image img = testkit::random_image(24, 24, 1, 11);
  const Image got = bicubic_resample_linear(img, down_spec(2, false));
  const Image want = testkit::ref_resample(img, 2, true, false);
  CHECK(testkit::max_abs_diff(got, want) <= 1e-6);
}

TEST_CASE("resample output is clamped to the unit interval") {
  Image img = Image::constant(16, 16, 1, 0.0);
  // Strong checkerboard pushes cubic overshoot below zero.
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) img.at(r, c) = ((r / 2 + c / 2) % 2 == 0) ? 0.0 : 1.0;
  const Image up = bicubic_resample(img, up_spec(4));
  CHECK(up.data.minCoeff() >= 0.0);
  CHECK(up.data.maxCoeff() <= 1.0);
  const Image raw = bicubic_resample_linear(img, up_spec(4));
  CHECK(raw.data.minCoeff() < 0.0);  // overshoot really happens
}

TEST_CASE("resample validation errors") {
  const Image img = testkit::random_image(10, 10, 1, 1);
  CHECK_THROWS_AS(bicubic_resample(img, down_spec(4)), std::invalid_argument);
  CHECK_THROWS_AS(bicubic_resample(img, ResampleSpec{0, ResampleDirection::up, false}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bicubic_resample(Image{}, down_spec(2)), std::invalid_argument);
}

TEST_CASE("scalar-templated image ops instantiate for float") {
  ImageT<float> img(8, 8, 1);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) img.at(r, c) = 0.25f + 0.5f * ((r + c) % 2);
  const ImageT<float> down = bicubic_resample(img, down_spec(2));
  CHECK(down.height == 4);
  const ImageT<float> luma = to_luma(img);
  CHECK(luma.channels == 1);
}

TEST_CASE("luma conversion") {
  const Image gray = testkit::random_image(6, 6, 1, 9);
  const Image same = to_luma(gray);
  CHECK((same.data == gray.data).all());

  Image rgb(1, 2, 3);
  rgb.at(0, 0, 0) = 1.0;
  rgb.at(0, 0, 1) = 1.0;
  rgb.at(0, 0, 2) = 1.0;
  rgb.at(0, 1, 0) = 1.0;
  const Image y = to_luma(rgb);
  CHECK(y.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.at(0, 1) == 0.299);
}

TEST_CASE("crop_to_multiple centers and aligns") {
  const Image img = testkit::random_image(50, 29, 1, 4);
  const Image cropped = crop_to_multiple(img, 12);
  CHECK(cropped.height == 48);
  CHECK(cropped.width == 24);
  CHECK(cropped.at(0, 0) == img.at(1, 2));

  const Image aligned = crop_to_multiple(img, 12, 4);
  CHECK(aligned.at(0, 0) == img.at(0, 0));  // offsets floored to multiples of 4
  CHECK_THROWS_AS(crop_to_multiple(img, 64), std::invalid_argument);
}

TEST_CASE("png round trip on quantized values") {
  Image img = testkit::random_image(9, 7, 3, 21);
  for (Eigen::Index i = 0; i < img.size(); ++i)
    img.data[i] = std::round(img.data[i] * 255.0) / 255.0;

  const auto path = temp_file("buddykit_roundtrip.png");
  save_png(img, path.string());
  const Image back = load_png(path.string());
  CHECK(back.same_shape(img));
  CHECK((back.data == img.data).all());
  std::filesystem::remove(path);
}

TEST_CASE("png quantization rounds half away from zero") {
  Image img(1, 2, 1);
  img.at(0, 0) = 0.5;
  img.at(0, 1) = 128.0 / 255.0;
  const auto path = temp_file("buddykit_quant.png");
  save_png(img, path.string());
  const Image back = load_png(path.string());
  CHECK(back.at(0, 0) == 128.0 / 255.0);
  CHECK(back.at(0, 1) == 128.0 / 255.0);
  std::filesystem::remove(path);
}

namespace {

// Hand-rolled writers for PNG variants save_png never produces.
void write_16bit_gray(const std::filesystem::path& path, const std::vector<uint16_t>& px, int w,
                      int h) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int r = 0; r < h; ++r)
    rows[static_cast<size_t>(r)] =
        reinterpret_cast<png_bytep>(const_cast<uint16_t*>(px.data() + r * w));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

void write_palette_png(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, 2, 2, 8, PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_color palette[2] = {{0, 0, 0}, {255, 255, 255}};
  png_set_PLTE(png, info, palette, 2);
  png_write_info(png, info);
  unsigned char row0[2] = {0, 1};
  unsigned char row1[2] = {1, 0};
  png_write_row(png, row0);
  png_write_row(png, row1);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST_CASE("16-bit png loads with 65535 normalization") {
  const auto path = temp_file("buddykit_16bit.png");
  write_16bit_gray(path, {0, 32768, 65535, 1000}, 2, 2);
  const Image img = load_png(path.string());
  CHECK(img.channels == 1);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(0, 1) == 32768.0 / 65535.0);
  CHECK(img.at(1, 0) == 1.0);
  CHECK(img.at(1, 1) == 1000.0 / 65535.0);
  std::filesystem::remove(path);
}

TEST_CASE("png loader rejects palettes and missing files") {
  const auto path = temp_file("buddykit_palette.png");
  write_palette_png(path);
  CHECK_THROWS_AS(load_png(path.string()), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_png("/nonexistent/buddykit.png"), std::runtime_error);
}
