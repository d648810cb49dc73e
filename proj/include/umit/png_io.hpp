#pragma once

#include <string>
#include <vector>

#include "umit/tensor.hpp"

namespace umit {

// 8-bit RGB PNG only. Tensor side is [3,H,W] in [-1,1]; bytes map through
// round((v+1)*127.5) and back via v = byte/127.5 - 1.
void save_png(const std::string& path, const Tensor& image);
Tensor load_png(const std::string& path);

// raw byte-plane variants used by the grid writer; rgb is row-major HxWx3
void save_png_rgb8(const std::string& path, const std::vector<unsigned char>& rgb, int w,
                   int h);
std::vector<unsigned char> load_png_rgb8(const std::string& path, int& w, int& h);

unsigned char byte_from_unit(float v);
float unit_from_byte(unsigned char b);

}  // namespace umit
