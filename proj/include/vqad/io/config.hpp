#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vqad/denoisers/train_prior.hpp"
#include "vqad/denoisers/transformer.hpp"
#include "vqad/vq/tokenizer.hpp"
#include "vqad/vq/train_tokenizer.hpp"

namespace vqad::io {

struct DataConfig {
  std::size_t image_size = 24;
  std::size_t count = 2000;
  std::size_t val_count = 200;  // the last val_count indices form the validation split
};

struct SamplingConfig {
  std::size_t steps = 0;  // 0: one step per latent position
  double temperature = 0.9;
  double large_temperature = 0.8;
  std::size_t stride = 1;
  std::size_t window_subset = 0;
};

struct MetricsConfig {
  std::size_t k = 5;
  std::size_t pool = 8;  // features are pool x pool average-pooled pixels
};

/// Every tunable number of the pipeline. Text form: `[section]` headers and
/// `key = value` lines, '#' starts a comment.
struct Config {
  DataConfig data;
  vq::TokenizerConfig tokenizer;
  vq::TrainTokenizerConfig tokenizer_train;
  denoisers::TransformerConfig prior;
  denoisers::TrainPriorConfig prior_train;
  SamplingConfig sampling;
  MetricsConfig metrics;

  /// Fills the prior's vocabulary and grid from the tokenizer and data
  /// settings and its masking from the objective, then validates.
  void finalize();
};

/// Parses config text over the defaults. Unknown sections or keys and bad
/// values raise UsageError naming `source` and the line.
Config parse_config(std::string_view text, const std::string& source = "config");
Config load_config(const std::filesystem::path& path);

/// Canonical text listing every key; parse_config(to_text(c)) == c.
std::string to_text(const Config& config);
std::uint64_t config_hash(const Config& config);

}  // namespace vqad::io
