#include "vqad/io/token_io.hpp"

#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"

namespace vqad::io {

std::vector<std::uint8_t> encode_tokens(std::span<const diffusion::TokenGrid> grids) {
  Writer w;
  w.bytes("VQTK");
  w.u32(kTokenVersion);
  const std::size_t h = grids.empty() ? 0 : grids[0].height, wd = grids.empty() ? 0 : grids[0].width;
  const std::size_t k = grids.empty() ? 0 : grids[0].codes;
  if (k > 65535) throw UsageError("tokens: codebook too large for 16-bit storage");
  w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(wd));
  w.u32(static_cast<std::uint32_t>(k));
  w.u64(grids.size());
  for (const auto& g : grids) {
    if (g.height != h || g.width != wd || g.codes != k) throw UsageError("tokens: grids of different extents");
    g.validate();
    for (auto v : g.values) w.u16(static_cast<std::uint16_t>(v));
  }
  return w.data();
}

std::vector<diffusion::TokenGrid> decode_tokens(std::span<const std::uint8_t> bytes, const std::string& what) {
  Reader r(bytes, what);
  if (r.remaining() < 4 || r.bytes(4) != "VQTK") throw FormatError(what + ": not a VQTK token file");
  if (const auto v = r.u32(); v != kTokenVersion) throw FormatError(what + ": token format version " + std::to_string(v));
  const std::size_t h = r.u32(), w = r.u32(), k = r.u32();
  const std::uint64_t n = r.u64();
  if (r.remaining() != n * h * w * 2) throw FormatError(what + ": token payload length disagrees with its header");
  std::vector<diffusion::TokenGrid> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<diffusion::Token> values(h * w);
    for (auto& v : values) v = r.u16();
    try {
      out.emplace_back(h, w, k, std::move(values));
    } catch (const UsageError& e) {
      throw FormatError(what + ": grid " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

void write_tokens(const std::filesystem::path& path, std::span<const diffusion::TokenGrid> grids) {
  write_file(path, encode_tokens(grids));
}

std::vector<diffusion::TokenGrid> read_tokens(const std::filesystem::path& path) {
  return decode_tokens(read_file(path), path.string());
}

}  // namespace vqad::io
