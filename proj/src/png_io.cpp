#include "umit/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace umit {

unsigned char byte_from_unit(float v) {
  float b = std::round((v + 1.0f) * 127.5f);
  if (b < 0) b = 0;
  if (b > 255) b = 255;
  return (unsigned char)(b);
}

float unit_from_byte(unsigned char b) { return float(b) / 127.5f - 1.0f; }

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void save_png_rgb8(const std::string& path, const std::vector<unsigned char>& rgb, int w,
                   int h) {
  if (w < 1 || h < 1 || rgb.size() != size_t(w) * size_t(h) * 3)
    throw std::invalid_argument("png: byte buffer does not match " + std::to_string(w) + "x" +
                                std::to_string(h));
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("png: cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: writer allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: write failed for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + size_t(y) * size_t(w) * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<unsigned char> load_png_rgb8(const std::string& path, int& w, int& h) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("png: cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw std::runtime_error("png: " + path + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: reader allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: failed to decode " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  if (png_get_bit_depth(png, info) != 8 ||
      png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: " + path + " is not 8-bit RGB");
  }
  w = int(png_get_image_width(png, info));
  h = int(png_get_image_height(png, info));
  std::vector<unsigned char> rgb(size_t(w) * size_t(h) * 3);
  for (int y = 0; y < h; ++y)
    png_read_row(png, rgb.data() + size_t(y) * size_t(w) * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rgb;
}

void save_png(const std::string& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (s.rank() != 3 || s[0] != 3)
    throw std::invalid_argument("save_png: expected [3,H,W], got " + s.str());
  const int h = s[1], w = s[2];
  const float* d = image.data();
  const size_t plane = size_t(h) * size_t(w);
  std::vector<unsigned char> rgb(plane * 3);
  for (size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) rgb[i * 3 + size_t(c)] = byte_from_unit(d[size_t(c) * plane + i]);
  save_png_rgb8(path, rgb, w, h);
}

Tensor load_png(const std::string& path) {
  int w = 0, h = 0;
  std::vector<unsigned char> rgb = load_png_rgb8(path, w, h);
  Tensor t = Tensor::zeros(Shape{3, h, w});
  float* d = t.data();
  const size_t plane = size_t(h) * size_t(w);
  for (size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) d[size_t(c) * plane + i] = unit_from_byte(rgb[i * 3 + size_t(c)]);
  return t;
}

}  // namespace umit
