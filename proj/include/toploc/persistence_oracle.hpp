#pragma once

// Brute-force reference for compute_persistence, intended for small fields.
//
// Pixels are inserted one at a time in the same order as the fast path. After
// every insertion the whole superlevel set is re-labelled by flood fill, and
// the component that now contains the new pixel is inspected: no live mode
// inside means a birth, two or more live modes mean every mode except the
// earliest-born one dies at the new pixel. No union-find, no incremental
// component bookkeeping.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "toploc/domain.hpp"
#include "toploc/grid.hpp"
#include "toploc/persistence.hpp"

namespace toploc {

template <std::floating_point T>
persistence_diagram<T> brute_force_persistence(const grid_field<T>& f, connectivity conn = connectivity::four) {
  if (f.size() == 0) throw error("brute_force_persistence: empty field");

  // Threshold sweep over distinct values, descending; within a level, lower indices first.
  std::vector<T> levels(f.values().begin(), f.values().end());
  std::sort(levels.begin(), levels.end(), [](T a, T b) { return a > b; });
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  binary_mask present(f.height(), f.width());
  struct live_mode {
    std::size_t pixel;
    std::size_t birth_step;
  };
  std::vector<live_mode> alive;
  persistence_diagram<T> out;
  std::size_t step = 0;

  for (const T t : levels) {
    for (std::size_t p = 0; p < f.size(); ++p) {
      if (f[p] != t) continue;
      present.set(p);
      const auto labels = label_components(present, conn);
      const std::uint32_t mine = labels[p];

      std::vector<live_mode> inside;
      std::vector<live_mode> outside;
      for (const auto& m : alive) (labels[m.pixel] == mine ? inside : outside).push_back(m);

      if (inside.empty()) {
        outside.push_back({p, step});
      } else {
        const auto eldest = std::min_element(inside.begin(), inside.end(), [](const auto& a, const auto& b) {
          return a.birth_step < b.birth_step;
        });
        for (auto it = inside.begin(); it != inside.end(); ++it) {
          if (it == eldest) continue;
          out.pairs.push_back({f.to_pixel(it->pixel), f.to_pixel(p), f[it->pixel], f[p], false});
        }
        outside.push_back(*eldest);
      }
      alive = std::move(outside);
      ++step;
    }
  }

  // Grid graphs are connected, so exactly one mode survives.
  if (alive.size() != 1) throw error("brute_force_persistence: expected one surviving component");
  out.pairs.push_back(detail::essential_pair(f, alive.front().pixel));
  detail::sort_diagram(out.pairs, f.width());
  return out;
}

}  // namespace toploc
