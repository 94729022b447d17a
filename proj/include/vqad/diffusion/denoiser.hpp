#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqad/diffusion/token_grid.hpp"

namespace vqad::diffusion {

/// Maps a partially masked grid of fixed extents to per-position
/// unnormalized log-probabilities over the K codes ([L * K], row-major).
/// Entries may be -infinity for impossible codes; NaN is a fault.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::size_t codes() const = 0;
  virtual std::size_t height() const = 0;
  virtual std::size_t width() const = 0;
  std::size_t length() const { return height() * width(); }

  virtual std::vector<double> logits(std::span<const Token> tokens) const = 0;
  /// One logits vector per grid; implementations may batch internally.
  virtual std::vector<std::vector<double>> logits_batch(
      std::span<const std::vector<Token>> grids) const;
};

/// Forwards to another denoiser and counts the calls made through it.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

  std::size_t codes() const override { return inner_.codes(); }
  std::size_t height() const override { return inner_.height(); }
  std::size_t width() const override { return inner_.width(); }
  std::vector<double> logits(std::span<const Token> tokens) const override;
  std::vector<std::vector<double>> logits_batch(
      std::span<const std::vector<Token>> grids) const override;

  std::size_t calls() const noexcept { return calls_; }
  void reset() noexcept { calls_ = 0; }

 private:
  const Denoiser& inner_;
  mutable std::size_t calls_ = 0;
};

/// Constant logits (all zero): the uniform categorical at every position.
class UniformDenoiser final : public Denoiser {
 public:
  UniformDenoiser(std::size_t codes, std::size_t height, std::size_t width)
      : codes_(codes), height_(height), width_(width) {}
  std::size_t codes() const override { return codes_; }
  std::size_t height() const override { return height_; }
  std::size_t width() const override { return width_; }
  std::vector<double> logits(std::span<const Token> tokens) const override;

 private:
  std::size_t codes_, height_, width_;
};

/// log softmax of each K-wide row; -inf entries stay -inf.
std::vector<double> log_softmax_rows(std::span<const double> logits, std::size_t codes);

}  // namespace vqad::diffusion
