#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vqad::diffusion {

using Token = std::int32_t;

/// Row-major grid of code indices in [0, K) plus the absorbing symbol MASK = K.
struct TokenGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t codes = 0;  // K
  std::vector<Token> values;

  TokenGrid() = default;
  TokenGrid(std::size_t height, std::size_t width, std::size_t codes);  // all MASK
  TokenGrid(std::size_t height, std::size_t width, std::size_t codes, std::vector<Token> values);

  Token mask() const noexcept { return static_cast<Token>(codes); }
  std::size_t size() const noexcept { return values.size(); }
  bool is_masked(std::size_t i) const noexcept { return values[i] == mask(); }
  std::size_t count_masked() const noexcept;
  bool fully_unmasked() const noexcept { return count_masked() == 0; }

  Token& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
  Token at(std::size_t row, std::size_t col) const { return values[row * width + col]; }

  /// Throws UsageError unless extents and every value are in range.
  void validate() const;

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

/// Mixed-radix index of a fully unmasked grid (token 0 is the least
/// significant digit). Used to key enumerable distributions.
std::uint64_t grid_index(std::span<const Token> tokens, std::size_t codes);
std::vector<Token> grid_from_index(std::uint64_t index, std::size_t length, std::size_t codes);

std::string to_string(const TokenGrid& grid);

}  // namespace vqad::diffusion
