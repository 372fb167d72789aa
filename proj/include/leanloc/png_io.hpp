#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "leanloc/image.hpp"

namespace leanloc::png {

// Lossless single-channel PNG. Encoding is byte-deterministic: fixed zlib
// level and no ancillary chunks.
std::vector<std::uint8_t> encode_gray8(const Image<std::uint8_t>& img);
std::vector<std::uint8_t> encode_gray16(const Image<std::uint16_t>& img);

Image<std::uint8_t> decode_gray8(const std::vector<std::uint8_t>& bytes);
Image<std::uint16_t> decode_gray16(const std::vector<std::uint8_t>& bytes);

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// 8-bit RGB, used for heatmap previews.
std::vector<std::uint8_t> encode_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace leanloc::png
