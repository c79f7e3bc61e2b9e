#pragma once

#include <filesystem>
#include <string>

#include "evw/tensor.hpp"

namespace evw::io {

// Packed tensor file: one textual header line "float32 d0 d1 ...\n"
// followed by little-endian float32 values in C order.
void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// Lossless 8-bit rasters. RGB tensors are 3xHxW in [0,255] raw scale,
// grayscale maps are HxW in [0,1].
void write_png_rgb(const Tensor& raw255, const std::filesystem::path& path);
Tensor read_png_rgb(const std::filesystem::path& path);  // -> 3xHxW in [0,255]
void write_png_gray(const Tensor& map01, const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace evw::io
