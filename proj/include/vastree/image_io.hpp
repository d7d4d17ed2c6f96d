#pragma once

// Raster file formats.
//   .f32 single channel: u32 H, u32 W, then H*W little-endian float32.
//   .f32 stack:          u32 H, u32 W, u32 C, then C planes row-major.
//   .png:                16-bit grayscale, value * 65535 / 1.5 clamped.

#include <filesystem>
#include <string>
#include <vector>

#include "vastree/core.hpp"

namespace vastree::io {

std::string encode_f32(const ImageGrid& img);
std::string encode_f32_stack(const std::vector<ImageGrid>& channels);
ImageGrid decode_f32(std::string_view bytes);
std::vector<ImageGrid> decode_f32_stack(std::string_view bytes);

std::string encode_png16(const ImageGrid& img);
ImageGrid decode_png16(std::string_view bytes);

/// Dispatches on extension (.f32 or .png); writes atomically.
void save_image(const std::filesystem::path& path, const ImageGrid& img);
ImageGrid load_image(const std::filesystem::path& path);

}  // namespace vastree::io
