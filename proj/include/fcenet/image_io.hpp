#pragma once

#include <string>

#include "fcenet/file_util.hpp"
#include "fcenet/tensor.hpp"

namespace fcenet {

// PNG reading: gray, gray+alpha, RGB, RGBA at 8 or 16 bits (palette and
// sub-byte depths are expanded). Alpha is dropped. Values map to [0,1].
Tensor read_png(const std::string& path);
Tensor decode_png(const std::string& bytes);

// Writes 1- or 3-channel tensors, clamped to [0,1], at bit_depth 8 or 16.
std::string encode_png(const Tensor& image, int bit_depth = 8);
void write_png(const std::string& path, const Tensor& image, int bit_depth = 8);

// Collapses RGB to one channel by averaging; 1-channel input is returned as is.
Tensor to_gray(const Tensor& image);

}  // namespace fcenet
