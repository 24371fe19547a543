#pragma once

// Gradient descent on a raw likelihood field, with no network in between.
// Stands in for training when checking that the combined loss drives the
// field toward one component per ground-truth dot.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "toploc/domain.hpp"
#include "toploc/dotmap.hpp"
#include "toploc/grid.hpp"
#include "toploc/losses.hpp"

namespace toploc {

struct scene {
  dot_annotation dots;
  binary_mask mask;
};

/// Rejection-samples k dots at pairwise distance >= min_sep and dilates them.
inline scene synth_scene(std::uint32_t height, std::uint32_t width, std::size_t k, double min_sep,
                         std::uint64_t rng_seed, std::size_t max_attempts = 100000) {
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> ux(0.0, double(width));
  std::uniform_real_distribution<double> uy(0.0, double(height));
  std::vector<point> pts;
  std::size_t attempts = 0;
  while (pts.size() < k) {
    if (++attempts > max_attempts)
      throw error("synth_scene: could not place " + std::to_string(k) + " dots at separation " +
                  std::to_string(min_sep) + " in " + shape{height, width}.str() + " after " +
                  std::to_string(max_attempts) + " attempts");
    const point p{ux(rng), uy(rng)};
    if (p.x >= width || p.y >= height) continue;
    const bool ok = std::all_of(pts.begin(), pts.end(),
                                [&](const point& q) { return std::hypot(p.x - q.x, p.y - q.y) >= min_sep; });
    if (ok) pts.push_back(p);
  }
  scene s{dot_annotation(std::move(pts)), binary_mask(height, width)};
  s.mask = dilate_dots(s.dots, height, width);
  return s;
}

/// Demo settings used by the CLI and the convergence sweep.
struct demo_defaults {
  static constexpr std::size_t iters = 2000;
  static constexpr double step = 0.4;
  static constexpr std::size_t warmup_iters = 200;
  static constexpr std::uint32_t patch_size = 2;
  static constexpr toploc::connectivity loss_connectivity = connectivity::eight;
  static constexpr toploc::essential_death essential = essential_death::zero;

  static loss_config loss(std::uint64_t rng_seed, double lambda_pers = 1.0) {
    return {lambda_pers, patch_size, loss_connectivity, rng_seed, essential};
  }
};

struct optimize_options {
  std::size_t iters = demo_defaults::iters;
  double step = demo_defaults::step;
  std::size_t warmup_iters = demo_defaults::warmup_iters;
  std::size_t trace_every = 50;
  extraction_config extraction{};
};

struct trace_entry {
  std::size_t iter = 0;
  double loss = 0;
  std::size_t components = 0;
};

template <std::floating_point T>
struct optimize_output {
  grid_field<T> final_field;
  std::vector<trace_entry> trace;
};

/// Projected gradient descent f <- clamp(f - step * dL/df, 0, 1) from seeded
/// uniform(0.2, 0.8) noise. The persistence term is off for the first
/// warmup_iters iterations; tiles get a fresh random offset each iteration.
template <std::floating_point T = double>
optimize_output<T> optimize_field(const binary_mask& gt_mask, const dot_annotation& ann, const loss_config& cfg,
                                  const optimize_options& opt = {}) {
  cfg.validate();
  if (!(opt.step > 0)) throw error("optimize_field: step must be > 0");
  const auto h = gt_mask.height();
  const auto w = gt_mask.width();
  ann.require_inside(h, w);

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> noise(0.2, 0.8);
  std::vector<T> v(gt_mask.size());
  for (auto& x : v) x = static_cast<T>(noise(rng));
  grid_field<T> f(h, w, std::move(v));

  optimize_output<T> out;
  const auto record = [&](std::size_t iter, double loss) {
    out.trace.push_back({iter, loss, extract_dot_map(f, opt.extraction).components});
  };

  loss_config stage = cfg;
  for (std::size_t it = 0; it < opt.iters; ++it) {
    stage.lambda_pers = it < opt.warmup_iters ? 0.0 : cfg.lambda_pers;
    const auto tiles = tile_grid(h, w, ann, cfg.patch_size, draw_tile_offset(cfg.patch_size, rng));
    const auto loss = combined_loss(f, gt_mask, tiles, stage);
    if (!std::isfinite(loss.value)) throw error("optimize_field: loss diverged at iteration " + std::to_string(it));
    if (opt.trace_every && it % opt.trace_every == 0) record(it, loss.value);

    std::vector<T> next(f.values().begin(), f.values().end());
    const auto g = loss.gradient.values();
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = std::clamp(static_cast<T>(next[i] - static_cast<T>(opt.step) * g[i]), T(0), T(1));
    f = grid_field<T>(h, w, std::move(next));
  }

  stage.lambda_pers = opt.iters <= opt.warmup_iters ? 0.0 : cfg.lambda_pers;
  const auto tiles = tile_grid(h, w, ann, cfg.patch_size, draw_tile_offset(cfg.patch_size, rng));
  record(opt.iters, combined_loss(f, gt_mask, tiles, stage).value);
  out.final_field = f;
  return out;
}

}  // namespace toploc
