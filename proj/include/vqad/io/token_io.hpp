#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vqad/diffusion/token_grid.hpp"

namespace vqad::io {

inline constexpr std::uint32_t kTokenVersion = 1;

/// "VQTK" | u32 version | u32 h | u32 w | u32 K | u64 count | count*h*w u16 values.
std::vector<std::uint8_t> encode_tokens(std::span<const diffusion::TokenGrid> grids);
std::vector<diffusion::TokenGrid> decode_tokens(std::span<const std::uint8_t> bytes, const std::string& what);
void write_tokens(const std::filesystem::path& path, std::span<const diffusion::TokenGrid> grids);
std::vector<diffusion::TokenGrid> read_tokens(const std::filesystem::path& path);

}  // namespace vqad::io
