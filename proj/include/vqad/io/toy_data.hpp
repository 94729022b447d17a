#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vqad/vq/image.hpp"

namespace vqad::io {

struct ToyShape {
  bool circle = false;
  // rectangle: rows [r0, r1) x cols [c0, c1); circle: centre (r0, c0), radius r1
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;
  int color = 0;  // palette index
};

struct ToyImage {
  vq::Image image;
  int background = 0;
  std::vector<ToyShape> shapes;
};

/// 8-colour palette used by the generator (RGB in [0, 1]).
const std::vector<std::array<float, 3>>& toy_palette();

/// Image `index` of the dataset with this seed: 1-3 axis-aligned rectangles
/// and circles on a plain background. Depends only on (seed, index).
ToyImage toy_image(std::uint64_t seed, std::size_t index, std::size_t size = 24);
std::vector<vq::Image> toy_dataset(std::uint64_t seed, std::size_t count, std::size_t size = 24);

/// Writes img_NNNNN.ppm files and manifest.csv into `dir` (created if needed).
void write_toy_dataset(const std::filesystem::path& dir, std::uint64_t seed, std::size_t count, std::size_t size = 24);

/// Index split: the last `val_count` images are validation.
struct Split {
  std::vector<vq::Image> train;
  std::vector<vq::Image> val;
};
Split split_train_val(std::vector<vq::Image> images, std::size_t val_count);

}  // namespace vqad::io
