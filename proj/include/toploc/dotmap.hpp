#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "toploc/domain.hpp"
#include "toploc/grid.hpp"

namespace toploc {

/// Per-dot disk radius before clipping to the image.
struct dilation_radius {
  double radius = 0;
  // True when the neighbor cap was binding; membership is then strict.
  bool capped = false;
};

/// The dot projected onto the hull of pixel centers, [0, w-1] x [0, h-1].
inline point disk_anchor(const point& p, std::uint32_t height, std::uint32_t width) {
  return {std::clamp(p.x, 0.0, double(width) - 1.0), std::clamp(p.y, 0.0, double(height) - 1.0)};
}

/// With `image` set, neighbor distances are measured between disk anchors.
inline std::vector<dilation_radius> dilation_radii(const dot_annotation& ann, double default_radius = 7.0,
                                                   std::optional<shape> image = std::nullopt) {
  std::vector<point> pts(ann.points().begin(), ann.points().end());
  if (image)
    for (auto& p : pts) p = disk_anchor(p, image->height, image->width);
  std::vector<dilation_radius> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double wanted = default_radius;
    if (ann.has_boxes()) {
      const auto& b = ann.boxes()[i];
      wanted = std::max({default_radius, b.w / 2.0, b.h / 2.0});
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) nearest = std::min(nearest, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    const double cap = (nearest - 1.0) / 2.0;
    out[i] = wanted < cap ? dilation_radius{wanted, false} : dilation_radius{cap, true};
  }
  return out;
}

/// Dilates each dot into a Euclidean disk of pixel centers.
///
/// Radius is max(default, w/2, h/2) when boxes are present, capped at
/// (d_nn - 1) / 2 where d_nn is the distance to the nearest other dot. When
/// the cap binds the disk is open (dist < r). Pixel (r, c) has its center at
/// x = c, y = r; disks are centered on disk_anchor, which only moves dots in
/// the last half pixel of each axis.
inline binary_mask dilate_dots(const dot_annotation& ann, std::uint32_t height, std::uint32_t width,
                               double default_radius = 7.0) {
  if (!(default_radius >= 0)) throw error("dilation radius must be >= 0");
  ann.require_inside(height, width);
  binary_mask mask(height, width);
  const auto radii = dilation_radii(ann, default_radius, shape{height, width});
  for (std::size_t i = 0; i < ann.size(); ++i) {
    const auto [r, strict] = radii[i];
    const auto p = disk_anchor(ann.points()[i], height, width);
    const auto r_lo = static_cast<std::int64_t>(std::max(0.0, std::ceil(p.y - r)));
    const auto r_hi = static_cast<std::int64_t>(std::min<double>(height - 1, std::floor(p.y + r)));
    const auto c_lo = static_cast<std::int64_t>(std::max(0.0, std::ceil(p.x - r)));
    const auto c_hi = static_cast<std::int64_t>(std::min<double>(width - 1, std::floor(p.x + r)));
    const double r2 = r * r;
    bool any = false;
    for (auto row = r_lo; row <= r_hi; ++row)
      for (auto col = c_lo; col <= c_hi; ++col) {
        const double dx = static_cast<double>(col) - p.x;
        const double dy = static_cast<double>(row) - p.y;
        const double d2 = dx * dx + dy * dy;
        if (strict ? d2 < r2 : d2 <= r2) {
          mask.set_at(static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col));
          any = true;
        }
      }
    // A disk tighter than half a pixel diagonal can miss every center; keep the nearest one.
    if (!any) mask.set_at(static_cast<std::uint32_t>(std::round(p.y)), static_cast<std::uint32_t>(std::round(p.x)));
  }
  return mask;
}

struct extraction_config {
  double high = 0.5;
  double low = 0.4;
  toploc::connectivity connectivity = connectivity::four;

  void validate() const {
    if (!(0.0 <= low && low <= high && high <= 1.0))
      throw error("threshold ordering violated: need 0 <= low <= high <= 1, got low " + std::to_string(low) +
                  ", high " + std::to_string(high));
  }
};

struct dot_map_result {
  binary_mask mask;
  std::size_t components = 0;
  std::vector<point> centers;
  // Per-pixel component id, 0 = background; ids follow raster order of each seed's first pixel.
  std::vector<std::uint32_t> labels;
};

/// Double thresholding that preserves the seed topology.
///
/// Seeds are the components of {f >= high}. They grow by a level-synchronous
/// breadth-first search through {f >= low}; a pixel reached in the same round
/// by several seeds takes the smallest seed id. A pixel that would touch a
/// pixel of a different component stays background, so the mask has exactly
/// one connected component per seed.
template <std::floating_point T>
dot_map_result extract_dot_map(const grid_field<T>& f, const extraction_config& cfg = {}) {
  cfg.validate();
  f.require_unit_range("extract_dot_map");
  const auto h = f.height();
  const auto w = f.width();
  const auto n = f.size();

  std::uint32_t n_seeds = 0;
  auto labels = label_components(superlevel_mask(f, static_cast<T>(cfg.high)), cfg.connectivity, &n_seeds);

  constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint8_t> closed(n, 0);  // labeled or rejected as a separator
  std::vector<std::uint32_t> candidate(n, none);
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i]) {
      closed[i] = 1;
      frontier.push_back(i);
    }

  const auto low = static_cast<T>(cfg.low);
  std::vector<std::size_t> next;
  while (!frontier.empty()) {
    next.clear();
    for (const std::size_t u : frontier)
      for_each_neighbor(u, h, w, cfg.connectivity, [&](std::size_t v) {
        if (closed[v] || f[v] < low) return;
        if (candidate[v] == none) next.push_back(v);
        candidate[v] = std::min(candidate[v], labels[u]);
      });
    std::sort(next.begin(), next.end());
    for (const std::size_t v : next) {
      bool touches_other = false;
      for_each_neighbor(v, h, w, cfg.connectivity, [&](std::size_t q) {
        if (labels[q] && labels[q] != candidate[v]) touches_other = true;
      });
      closed[v] = 1;
      if (!touches_other) labels[v] = candidate[v];
    }
    frontier.clear();
    for (const std::size_t v : next)
      if (labels[v]) frontier.push_back(v);
  }

  dot_map_result out;
  out.mask = binary_mask(h, w);
  out.components = n_seeds;
  std::vector<double> sum_row(n_seeds, 0), sum_col(n_seeds, 0);
  std::vector<std::size_t> area(n_seeds, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    out.mask.set(i);
    const std::uint32_t k = labels[i] - 1;
    sum_row[k] += static_cast<double>(i / w);
    sum_col[k] += static_cast<double>(i % w);
    ++area[k];
  }
  out.centers.reserve(n_seeds);
  for (std::uint32_t k = 0; k < n_seeds; ++k) {
    const double a = static_cast<double>(area[k]);
    out.centers.push_back({sum_col[k] / a, sum_row[k] / a});
  }
  out.labels = std::move(labels);
  return out;
}

}  // namespace toploc
