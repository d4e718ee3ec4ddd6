#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hemocnn/tensor.hpp"

namespace hemocnn {

/// 8-bit interleaved RGB raster.
struct Image8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;  // height * width * 3

    std::uint8_t& px(std::size_t y, std::size_t x, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
    std::uint8_t px(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
};

/// Decodes JPEG or PNG (sniffed from the file header, not the extension).
/// Grayscale is promoted to RGB by channel replication. Throws DecodeError.
Image8 decode_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Throws DataError on I/O failure.
void write_png(const std::filesystem::path& path, const Image8& image);

/// Bilinear resize with half-pixel centers (no corner alignment), then
/// scale to [0,1]. Returns [3, out_h, out_w].
Tensor resize_to_tensor(const Image8& image, std::size_t out_h, std::size_t out_w);

/// decode_image + resize_to_tensor.
Tensor load_image(const std::filesystem::path& path, std::size_t out_h = 100, std::size_t out_w = 100);

}  // namespace hemocnn
