#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "toploc/domain.hpp"
#include "toploc/persistence.hpp"

namespace toploc {

/// Axis-aligned patch of the image, already clipped to it.
struct tile {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::size_t gt_count = 0;
  friend bool operator==(const tile&, const tile&) = default;
};

template <std::floating_point T>
struct loss_result {
  double value = 0;
  grid_field<T> gradient;
};

namespace detail {

struct dense_loss {
  double value = 0;
  std::vector<double> gradient;
};

template <std::floating_point T>
grid_field<T> to_gradient_field(shape s, const std::vector<double>& g) {
  return grid_field<T>(s.height, s.width, std::vector<T>(g.begin(), g.end()));
}

template <class G, std::floating_point T>
dense_loss dice_dense(const G& g, const grid_field<T>& e) {
  double s_ge = 0, s_gg = 0, s_ee = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double ei = static_cast<double>(e[i]);
    s_ge += gi * ei;
    s_gg += gi * gi;
    s_ee += ei * ei;
  }
  const double num = s_ge + 1.0;
  const double den = s_gg + s_ee + 1.0;
  dense_loss out;
  out.value = 1.0 - 2.0 * num / den;
  out.gradient.resize(e.size());
  const double den2 = den * den;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double ei = static_cast<double>(e[i]);
    out.gradient[i] = -2.0 * (gi * den - 2.0 * ei * num) / den2;
  }
  return out;
}

inline void require_same_shape(shape a, shape b, const char* what) {
  if (a != b) throw error(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <std::floating_point T>
void require_tiles_inside(const grid_field<T>& f, const std::vector<tile>& tiles) {
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const auto& t = tiles[k];
    if (t.height == 0 || t.width == 0 || std::uint64_t{t.row} + t.height > f.height() ||
        std::uint64_t{t.col} + t.width > f.width())
      throw error("tile " + std::to_string(k) + " at (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                  ") size " + shape{t.height, t.width}.str() + " not contained in field " + f.dims().str());
  }
}

template <std::floating_point T>
grid_field<T> crop(const grid_field<T>& f, const tile& t) {
  std::vector<T> v;
  v.reserve(std::size_t{t.height} * t.width);
  for (std::uint32_t r = 0; r < t.height; ++r)
    for (std::uint32_t c = 0; c < t.width; ++c) v.push_back(f(t.row + r, t.col + c));
  return grid_field<T>(t.height, t.width, std::move(v));
}

template <std::floating_point T>
dense_loss persistence_dense(const grid_field<T>& f, const std::vector<tile>& tiles, connectivity conn,
                             essential_death ess) {
  dense_loss out;
  out.gradient.assign(f.size(), 0.0);
  if (tiles.empty()) return out;
  const double scale = 1.0 / static_cast<double>(tiles.size());
  double total = 0;
  for (const auto& t : tiles) {
    const auto sub = crop(f, t);
    const auto diagram = compute_persistence(sub, conn);
    const auto split = split_top_c(diagram, t.gt_count);
    double tile_loss = 0;
    const auto apply = [&](const persistence_pair<T>& p, double sign) {
      out.gradient[f.index(t.row + p.mode.row, t.col + p.mode.col)] += sign * scale;
      if (p.essential && ess == essential_death::zero) {
        tile_loss += sign * static_cast<double>(p.birth);
        return;
      }
      tile_loss += sign * (static_cast<double>(p.birth) - static_cast<double>(p.death));
      out.gradient[f.index(t.row + p.saddle.row, t.col + p.saddle.col)] -= sign * scale;
    };
    for (const auto& p : split.selected) apply(p, -1.0);
    for (const auto& p : split.rejected) apply(p, +1.0);
    total += tile_loss;
  }
  out.value = total * scale;
  return out;
}

}  // namespace detail

/// 1 - 2 (sum G*E + 1) / (sum G^2 + sum E^2 + 1), with its exact gradient in E.
template <std::floating_point T>
loss_result<T> dice_loss(const grid_field<T>& g, const grid_field<T>& e) {
  detail::require_same_shape(g.dims(), e.dims(), "dice_loss");
  g.require_unit_range("dice_loss ground truth");
  e.require_unit_range("dice_loss estimate");
  auto d = detail::dice_dense(g, e);
  return {d.value, detail::to_gradient_field<T>(e.dims(), d.gradient)};
}

template <std::floating_point T>
loss_result<T> dice_loss(const binary_mask& g, const grid_field<T>& e) {
  detail::require_same_shape(g.dims(), e.dims(), "dice_loss");
  e.require_unit_range("dice_loss estimate");
  auto d = detail::dice_dense(g, e);
  return {d.value, detail::to_gradient_field<T>(e.dims(), d.gradient)};
}

struct tile_offset {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

/// Uniform offset in [0, patch)^2.
template <class Engine>
tile_offset draw_tile_offset(std::uint32_t patch, Engine& rng) {
  if (patch < 1) throw error("patch size must be >= 1");
  std::uniform_int_distribution<std::uint32_t> dist(0, patch - 1);
  const std::uint32_t r = dist(rng);
  const std::uint32_t c = dist(rng);
  return {r, c};
}

/// Regular patch grid shifted by offset; border slivers are kept, clipped to the image.
inline std::vector<tile> tile_grid(std::uint32_t height, std::uint32_t width, const dot_annotation& ann,
                                   std::uint32_t patch, tile_offset offset) {
  if (patch < 1) throw error("patch size must be >= 1");
  if (offset.row >= patch || offset.col >= patch) throw error("tile offset must lie in [0, patch)");
  const auto bands = [patch](std::uint32_t extent, std::uint32_t shift) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    std::uint64_t start = 0;
    std::uint64_t next = shift == 0 ? patch : shift;
    while (start < extent) {
      const std::uint64_t stop = std::min<std::uint64_t>(next, extent);
      out.emplace_back(static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(stop - start));
      start = stop;
      next = stop + patch;
    }
    return out;
  };
  std::vector<tile> tiles;
  for (const auto& [r0, rh] : bands(height, offset.row))
    for (const auto& [c0, cw] : bands(width, offset.col))
      tiles.push_back({r0, c0, rh, cw, count_in_rect(ann, c0, r0, double(c0) + cw, double(r0) + rh)});
  return tiles;
}

inline std::vector<tile> tile_image(std::uint32_t height, std::uint32_t width, const dot_annotation& ann,
                                    std::uint32_t patch, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return tile_grid(height, width, ann, patch, draw_tile_offset(patch, rng));
}

/// Mean over tiles of  -sum(top-c persistence) + sum(remaining persistence),
/// each tile filtered as its own domain with c = its ground-truth dot count.
template <std::floating_point T>
loss_result<T> persistence_loss(const grid_field<T>& f, const std::vector<tile>& tiles,
                                connectivity conn = connectivity::four,
                                essential_death ess = essential_death::field_min) {
  f.require_unit_range("persistence_loss");
  detail::require_tiles_inside(f, tiles);
  auto d = detail::persistence_dense(f, tiles, conn, ess);
  return {d.value, detail::to_gradient_field<T>(f.dims(), d.gradient)};
}

template <class Mask, std::floating_point T>
loss_result<T> combined_loss(const grid_field<T>& f, const Mask& g_mask, const std::vector<tile>& tiles,
                             const loss_config& cfg) {
  cfg.validate();
  detail::require_same_shape(g_mask.dims(), f.dims(), "combined_loss");
  f.require_unit_range("combined_loss");
  if constexpr (!std::is_same_v<Mask, binary_mask>) g_mask.require_unit_range("combined_loss ground truth");
  detail::require_tiles_inside(f, tiles);

  auto total = detail::dice_dense(g_mask, f);
  if (cfg.lambda_pers != 0.0) {
    const auto pers = detail::persistence_dense(f, tiles, cfg.connectivity, cfg.essential);
    total.value += cfg.lambda_pers * pers.value;
    for (std::size_t i = 0; i < total.gradient.size(); ++i) total.gradient[i] += cfg.lambda_pers * pers.gradient[i];
  }
  return {total.value, detail::to_gradient_field<T>(f.dims(), total.gradient)};
}

}  // namespace toploc
