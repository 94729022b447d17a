#include "vqad/vq/image.hpp"

#include <string>

#include "vqad/error.hpp"

namespace vqad::vq {

ad::Tensor to_nchw(std::span<const Image> images) {
  if (images.empty()) throw UsageError("to_nchw: no images");
  const Image& first = images.front();
  const std::size_t H = first.height, W = first.width, C = first.channels;
  ad::Tensor out({images.size(), C, H, W});
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& im = images[b];
    if (im.height != H || im.width != W || im.channels != C) {
      throw UsageError("to_nchw: image " + std::to_string(b) + " has different extents");
    }
    for (std::size_t ch = 0; ch < C; ++ch) {
      for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) out[((b * C + ch) * H + r) * W + c] = im.at(r, c, ch);
      }
    }
  }
  return out;
}

Image from_nchw(const ad::Tensor& batch, std::size_t b) {
  if (batch.rank() != 4 || b >= batch.dim(0)) throw UsageError("from_nchw: bad batch index or rank");
  const std::size_t C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  Image im(H, W, C);
  for (std::size_t ch = 0; ch < C; ++ch) {
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) im.at(r, c, ch) = batch[((b * C + ch) * H + r) * W + c];
    }
  }
  return im;
}

double mse(const Image& a, const Image& b) {
  if (a.pixels.size() != b.pixels.size() || a.pixels.empty()) throw UsageError("mse: extents differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

Image mean_image(std::span<const Image> images) {
  if (images.empty()) throw UsageError("mean_image: no images");
  std::vector<double> acc(images.front().pixels.size(), 0.0);
  for (const auto& im : images) {
    if (im.pixels.size() != acc.size()) throw UsageError("mean_image: extents differ");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += im.pixels[i];
  }
  Image out(images.front().height, images.front().width, images.front().channels);
  for (std::size_t i = 0; i < acc.size(); ++i) out.pixels[i] = static_cast<float>(acc[i] / static_cast<double>(images.size()));
  return out;
}

double mean_baseline_mse(std::span<const Image> images) {
  const Image mean = mean_image(images);
  double s = 0.0;
  for (const auto& im : images) s += mse(im, mean);
  return s / static_cast<double>(images.size());
}

}  // namespace vqad::vq
