#include "vqad/io/toy_data.hpp"

#include <cstdio>

#include "vqad/diffusion/rng.hpp"
#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"
#include "vqad/io/image_io.hpp"

namespace vqad::io {

const std::vector<std::array<float, 3>>& toy_palette() {
  // byte-valued so images survive an 8-bit file unchanged
  static const std::vector<std::array<float, 3>> palette = [] {
    const int bytes[8][3] = {{13, 13, 26},  {242, 242, 230}, {217, 51, 38},  {51, 166, 64},
                             {38, 77, 204}, {242, 204, 38},  {153, 64, 179}, {51, 191, 204}};
    std::vector<std::array<float, 3>> out;
    for (const auto& b : bytes) out.push_back({b[0] / 255.0f, b[1] / 255.0f, b[2] / 255.0f});
    return out;
  }();
  return palette;
}

ToyImage toy_image(std::uint64_t seed, std::size_t index, std::size_t size) {
  if (size < 8) throw UsageError("toy data: image size must be >= 8");
  diffusion::Rng rng(seed, 0xda7a0000ULL + index);
  const auto& palette = toy_palette();
  const int n = static_cast<int>(size);
  ToyImage out;
  out.background = static_cast<int>(rng.uniform_int(0, palette.size() - 1));
  const std::size_t count = rng.uniform_int(1, 3);
  for (std::size_t s = 0; s < count; ++s) {
    ToyShape shape;
    shape.circle = rng.bernoulli(0.5);
    do {
      shape.color = static_cast<int>(rng.uniform_int(0, palette.size() - 1));
    } while (shape.color == out.background);
    if (shape.circle) {
      shape.r1 = static_cast<int>(rng.uniform_int(2, static_cast<std::size_t>(n / 4)));
      shape.r0 = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(shape.r1), static_cast<std::size_t>(n - 1 - shape.r1)));
      shape.c0 = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(shape.r1), static_cast<std::size_t>(n - 1 - shape.r1)));
    } else {
      const int h = static_cast<int>(rng.uniform_int(4, static_cast<std::size_t>(n / 2)));
      const int w = static_cast<int>(rng.uniform_int(4, static_cast<std::size_t>(n / 2)));
      shape.r0 = static_cast<int>(rng.uniform_int(0, static_cast<std::size_t>(n - h)));
      shape.c0 = static_cast<int>(rng.uniform_int(0, static_cast<std::size_t>(n - w)));
      shape.r1 = shape.r0 + h;
      shape.c1 = shape.c0 + w;
    }
    out.shapes.push_back(shape);
  }
  out.image = vq::Image(size, size, 3);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int color = out.background;
      for (const auto& s : out.shapes) {
        const bool inside = s.circle ? (r - s.r0) * (r - s.r0) + (c - s.c0) * (c - s.c0) <= s.r1 * s.r1
                                     : r >= s.r0 && r < s.r1 && c >= s.c0 && c < s.c1;
        if (inside) color = s.color;
      }
      for (std::size_t ch = 0; ch < 3; ++ch) out.image.at(r, c, ch) = palette[static_cast<std::size_t>(color)][ch];
    }
  }
  return out;
}

std::vector<vq::Image> toy_dataset(std::uint64_t seed, std::size_t count, std::size_t size) {
  std::vector<vq::Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(toy_image(seed, i, size).image);
  return out;
}

void write_toy_dataset(const std::filesystem::path& dir, std::uint64_t seed, std::size_t count, std::size_t size) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::string manifest = "filename,index,background,shapes\n";
  for (std::size_t i = 0; i < count; ++i) {
    const ToyImage t = toy_image(seed, i, size);
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu.ppm", i);
    write_image(dir / name, t.image);
    std::string shapes;
    for (const auto& s : t.shapes) {
      if (!shapes.empty()) shapes += ';';
      shapes += s.circle ? "circle:" + std::to_string(s.r0) + ":" + std::to_string(s.c0) + ":" + std::to_string(s.r1)
                         : "rect:" + std::to_string(s.r0) + ":" + std::to_string(s.c0) + ":" + std::to_string(s.r1) + ":" +
                               std::to_string(s.c1);
      shapes += ":" + std::to_string(s.color);
    }
    manifest += std::string(name) + "," + std::to_string(i) + "," + std::to_string(t.background) + "," + shapes + "\n";
  }
  write_text(dir / "manifest.csv", manifest);
}

Split split_train_val(std::vector<vq::Image> images, std::size_t val_count) {
  if (val_count >= images.size()) {
    throw UsageError("split: " + std::to_string(val_count) + " validation images leave no training data out of " +
                     std::to_string(images.size()));
  }
  Split s;
  const auto cut = images.begin() + static_cast<std::ptrdiff_t>(images.size() - val_count);
  s.val.assign(std::make_move_iterator(cut), std::make_move_iterator(images.end()));
  images.erase(cut, images.end());
  s.train = std::move(images);
  return s;
}

}  // namespace vqad::io
