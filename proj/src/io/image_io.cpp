#include "vqad/io/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"

namespace vqad::io {

namespace {

// Reads one whitespace-delimited header integer, skipping '#' comments.
std::size_t header_int(std::span<const std::uint8_t> b, std::size_t& pos, const std::string& what) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t v = 0, digits = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos++] - '0');
    if (++digits > 9) throw FormatError(what + ": header value too large");
  }
  if (digits == 0) throw FormatError(what + ": malformed PNM header");
  return v;
}

}  // namespace

vq::Image decode_pnm(std::span<const std::uint8_t> b, const std::string& what) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) throw FormatError(what + ": not a binary PGM/PPM file");
  const std::size_t channels = b[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  const std::size_t width = header_int(b, pos, what);
  const std::size_t height = header_int(b, pos, what);
  const std::size_t maxval = header_int(b, pos, what);
  if (maxval != 255) throw FormatError(what + ": only 8-bit images (maxval 255) are supported");
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError(what + ": malformed PNM header");
  ++pos;
  const std::size_t n = width * height * channels;
  if (b.size() - pos != n) {
    throw FormatError(what + ": expected " + std::to_string(n) + " pixel bytes, found " + std::to_string(b.size() - pos));
  }
  vq::Image im(height, width, channels);
  for (std::size_t i = 0; i < n; ++i) im.pixels[i] = static_cast<float>(b[pos + i]) / 255.0f;
  return im;
}

std::vector<std::uint8_t> encode_pnm(const vq::Image& im) {
  if (im.channels != 1 && im.channels != 3) throw UsageError("write_image: only 1 or 3 channels can be written");
  const std::string header = std::string(im.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(im.width) + " " +
                             std::to_string(im.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (float v : im.pixels) {
    const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  return out;
}

vq::Image read_image(const std::filesystem::path& path) { return decode_pnm(read_file(path), path.string()); }

void write_image(const std::filesystem::path& path, const vq::Image& image) { write_file(path, encode_pnm(image)); }

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw UsageError("image directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<vq::Image> read_images(const std::filesystem::path& dir) {
  std::vector<vq::Image> out;
  for (const auto& p : list_images(dir)) out.push_back(read_image(p));
  return out;
}

canvas::RegionMask read_region_mask(const std::filesystem::path& path, std::size_t gh, std::size_t gw,
                                    std::size_t factor) {
  const vq::Image im = read_image(path);
  if (im.channels != 1) throw FormatError(path.string() + ": region masks must be PGM");
  canvas::RegionMask mask{gh, gw, std::vector<std::uint8_t>(gh * gw, 0)};
  if (im.height == gh && im.width == gw) {
    for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = im.pixels[i] > 0.0f;
  } else if (im.height == gh * factor && im.width == gw * factor) {
    for (std::size_t r = 0; r < im.height; ++r) {
      for (std::size_t c = 0; c < im.width; ++c) {
        if (im.at(r, c, 0) > 0.0f) mask.values[(r / factor) * gw + c / factor] = 1;
      }
    }
  } else {
    throw UsageError(path.string() + ": mask is " + std::to_string(im.height) + "x" + std::to_string(im.width) +
                     ", expected " + std::to_string(gh) + "x" + std::to_string(gw) + " or " + std::to_string(gh * factor) +
                     "x" + std::to_string(gw * factor));
  }
  return mask;
}

}  // namespace vqad::io
