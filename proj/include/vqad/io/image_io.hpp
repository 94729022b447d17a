#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vqad/canvas/canvas.hpp"
#include "vqad/vq/image.hpp"

namespace vqad::io {

/// 8-bit binary PPM (P6, 3 channels) or PGM (P5, 1 channel); values are
/// scaled to [0, 1] on read and clamped and rounded on write.
vq::Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const vq::Image& image);
vq::Image decode_pnm(std::span<const std::uint8_t> bytes, const std::string& what);
std::vector<std::uint8_t> encode_pnm(const vq::Image& image);

/// Every .ppm / .pgm file of a directory in lexicographic order.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);
std::vector<vq::Image> read_images(const std::filesystem::path& dir);

/// PGM region mask: zero keeps, nonzero regenerates. A mask at image
/// resolution marks a latent when any pixel of its factor x factor block is set.
canvas::RegionMask read_region_mask(const std::filesystem::path& path, std::size_t grid_height,
                                    std::size_t grid_width, std::size_t factor);

}  // namespace vqad::io
