#pragma once

#include <filesystem>

#include "lesiongen/core/image.hpp"

namespace lesiongen {

// 8-bit image file I/O. PNG and JPEG are decoded to planar float [0,1];
// writes are PNG only, with fixed encoder settings so identical pixels
// produce identical bytes.
ImageF read_image(const std::filesystem::path& path);          // 3-channel RGB
Mask read_mask_png(const std::filesystem::path& path);         // {0,255} -> {0,1}
void write_rgb_png(const std::filesystem::path& path, const ImageF& rgb);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);  // {0,1} -> {0,255}

}  // namespace lesiongen
