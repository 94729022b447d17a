#include <algorithm>
#include <string>

#include "vqad/canvas/canvas.hpp"
#include "vqad/diffusion/schedule.hpp"
#include "vqad/error.hpp"

namespace vqad::canvas {

std::size_t RegionMask::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

TokenGrid inpaint(const TokenGrid& z0, const RegionMask& region, const diffusion::Denoiser& denoiser,
                  const InpaintOptions& options, diffusion::Rng& rng, diffusion::SampleStats* stats) {
  z0.validate();
  if (region.height != z0.height || region.width != z0.width || region.values.size() != z0.size()) {
    throw UsageError("inpaint: region is " + std::to_string(region.height) + "x" + std::to_string(region.width) +
                     " but the grid is " + std::to_string(z0.height) + "x" + std::to_string(z0.width));
  }
  TokenGrid start = z0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (region.values[i]) {
      start.values[i] = start.mask();
    } else if (z0.is_masked(i)) {
      throw UsageError("inpaint: position " + std::to_string(i) + " outside the region is masked");
    }
  }
  const std::size_t t0 = start.count_masked();
  if (t0 == 0) return z0;

  const std::size_t steps = options.steps == 0 ? t0 : options.steps;
  const auto budget = diffusion::make_step_budget(t0, steps);
  Canvas canvas{start, denoiser.height(), denoiser.width(), options.stride, options.window_subset};
  window_origins(canvas);
  TokenGrid out = diffusion::reverse_process(
      start, budget,
      [&](const TokenGrid& z) {
        canvas.grid = z;
        return aggregate_denoise(canvas, denoiser, options.temperature, &rng);
      },
      rng, stats);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (!region.values[i] && out.values[i] != z0.values[i]) {
      throw std::logic_error("inpaint changed a position outside the region");
    }
  }
  return out;
}

}  // namespace vqad::canvas
