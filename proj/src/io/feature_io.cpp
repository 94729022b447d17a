#include "vqad/io/feature_io.hpp"

#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"

namespace vqad::io {

std::vector<std::uint8_t> encode_features(const metrics::FeatureSet& f) {
  Writer w;
  w.bytes("VQFT");
  w.u32(kFeatureVersion);
  w.u64(f.n);
  w.u32(static_cast<std::uint32_t>(f.d));
  for (float v : f.values) w.f32(v);
  return w.data();
}

metrics::FeatureSet decode_features(std::span<const std::uint8_t> bytes, const std::string& what) {
  Reader r(bytes, what);
  if (r.remaining() < 4 || r.bytes(4) != "VQFT") throw FormatError(what + ": not a VQFT feature file");
  if (const auto v = r.u32(); v != kFeatureVersion) throw FormatError(what + ": feature format version " + std::to_string(v));
  const std::uint64_t n = r.u64();
  const std::uint32_t d = r.u32();
  if (r.remaining() != n * d * 4) throw FormatError(what + ": feature payload length disagrees with its header");
  std::vector<float> values(n * d);
  for (auto& v : values) v = r.f32();
  return metrics::FeatureSet(n, d, std::move(values));
}

void write_features(const std::filesystem::path& path, const metrics::FeatureSet& f) { write_file(path, encode_features(f)); }

metrics::FeatureSet read_features(const std::filesystem::path& path) { return decode_features(read_file(path), path.string()); }

}  // namespace vqad::io
