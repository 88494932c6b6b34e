#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stylemod/tensor.hpp"

namespace stylemod {

// Images are Tensors of shape [3,H,W] with values in [0,1].
using Image = Tensor;

inline Image make_image(int h, int w) { return Tensor({3, h, w}); }

inline bool is_image(const Tensor& t) { return t.rank() == 3 && t.dim(0) == 3; }

// Lossless 8-bit RGB container (binary PPM, P6).
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

// Quantize to 8-bit and back; the on-disk representation round-trips exactly.
Image quantize8(const Image& img);

double mean_abs_diff(const Image& a, const Image& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_pixel(const Image& img);

// Horizontal strip / rectangular grid of same-sized tiles, 2px white gutter.
Image tile_grid(const std::vector<Image>& tiles, int cols);

}  // namespace stylemod
