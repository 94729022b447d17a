#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqad/autodiff/adam.hpp"
#include "vqad/autodiff/tensor.hpp"
#include "vqad/denoisers/transformer.hpp"
#include "vqad/io/config.hpp"
#include "vqad/vq/tokenizer.hpp"

namespace vqad::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: "VQAD" | u32 version | u64 config hash | u64 seed | u32 sections,
/// then per section u32 name length, name, u64 payload length, payload
/// (u32 rank, rank x u64 extents, f32 values), then u32 length + config text.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<std::pair<std::string, ad::Tensor>> sections;

  void add(std::string name, ad::Tensor value);
  bool has(const std::string& name) const;
  /// Throws FormatError when absent.
  const ad::Tensor& get(const std::string& name) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
/// Bad magic, another version, truncation or trailing bytes raise FormatError.
Checkpoint deserialize(std::span<const std::uint8_t> bytes, const std::string& what = "checkpoint");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters under "tokenizer/", optional Adam moments under "adam.".
Checkpoint tokenizer_checkpoint(const vq::Tokenizer& tokenizer, const Config& config, std::uint64_t seed,
                                const ad::AdamState* adam = nullptr);
Checkpoint prior_checkpoint(const denoisers::Transformer& prior, const Config& config, std::uint64_t seed,
                            const ad::AdamState* adam = nullptr);

/// The embedded config, re-parsed.
Config checkpoint_config(const Checkpoint& checkpoint);
/// UsageError when the checkpoint holds the other model kind.
vq::Tokenizer load_tokenizer(const Checkpoint& checkpoint);
denoisers::Transformer load_prior(const Checkpoint& checkpoint);
/// Restores Adam moments saved alongside the given parameters.
ad::AdamState load_adam(const Checkpoint& checkpoint, std::span<ad::Parameter* const> params, ad::AdamConfig config);

/// UsageError unless the prior was trained on this tokenizer's vocabulary
/// and latent grid.
void check_compatible(const Config& tokenizer, const Config& prior);

}  // namespace vqad::io
