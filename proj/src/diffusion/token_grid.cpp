#include "vqad/diffusion/token_grid.hpp"

#include <algorithm>
#include <sstream>

#include "vqad/error.hpp"

namespace vqad::diffusion {

TokenGrid::TokenGrid(std::size_t h, std::size_t w, std::size_t k)
    : height(h), width(w), codes(k), values(h * w, static_cast<Token>(k)) {}

TokenGrid::TokenGrid(std::size_t h, std::size_t w, std::size_t k, std::vector<Token> v)
    : height(h), width(w), codes(k), values(std::move(v)) {
  validate();
}

std::size_t TokenGrid::count_masked() const noexcept {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), mask()));
}

void TokenGrid::validate() const {
  if (codes < 2) throw UsageError("token grid: need at least 2 codes, got " + std::to_string(codes));
  if (values.size() != height * width) {
    throw UsageError("token grid: " + std::to_string(values.size()) + " values for " +
                     std::to_string(height) + "x" + std::to_string(width) + " extents");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] > mask()) {
      throw UsageError("token grid: value " + std::to_string(values[i]) + " at position " +
                       std::to_string(i) + " outside [0, " + std::to_string(codes) + "]");
    }
  }
}

std::uint64_t grid_index(std::span<const Token> tokens, std::size_t codes) {
  std::uint64_t index = 0;
  for (std::size_t i = tokens.size(); i-- > 0;) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= codes) {
      throw UsageError("grid_index: token " + std::to_string(tokens[i]) + " is not a code");
    }
    index = index * codes + static_cast<std::uint64_t>(tokens[i]);
  }
  return index;
}

std::vector<Token> grid_from_index(std::uint64_t index, std::size_t length, std::size_t codes) {
  std::vector<Token> tokens(length);
  for (std::size_t i = 0; i < length; ++i) {
    tokens[i] = static_cast<Token>(index % codes);
    index /= codes;
  }
  return tokens;
}

std::string to_string(const TokenGrid& grid) {
  std::ostringstream os;
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      if (c) os << ' ';
      if (grid.at(r, c) == grid.mask()) {
        os << 'm';
      } else {
        os << grid.at(r, c);
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace vqad::diffusion
