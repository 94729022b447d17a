#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vqad/metrics/features.hpp"

namespace vqad::io {

inline constexpr std::uint32_t kFeatureVersion = 1;

/// "VQFT" | u32 version | u64 n | u32 d | n*d f32 values, row-major.
std::vector<std::uint8_t> encode_features(const metrics::FeatureSet& features);
metrics::FeatureSet decode_features(std::span<const std::uint8_t> bytes, const std::string& what);
void write_features(const std::filesystem::path& path, const metrics::FeatureSet& features);
metrics::FeatureSet read_features(const std::filesystem::path& path);

}  // namespace vqad::io
