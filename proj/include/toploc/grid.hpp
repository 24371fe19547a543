#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "toploc/domain.hpp"

namespace toploc {

/// Calls fn(neighbor_index) for each in-bounds neighbor of linear index i.
template <class Fn>
inline void for_each_neighbor(std::size_t i, std::uint32_t height, std::uint32_t width, connectivity conn, Fn&& fn) {
  static constexpr std::array<std::array<int, 2>, 8> offsets{
      {{-1, 0}, {0, -1}, {0, 1}, {1, 0}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};
  const auto row = static_cast<std::int64_t>(i / width);
  const auto col = static_cast<std::int64_t>(i % width);
  const int n = conn == connectivity::four ? 4 : 8;
  for (int k = 0; k < n; ++k) {
    const std::int64_t r = row + offsets[k][0];
    const std::int64_t c = col + offsets[k][1];
    if (r < 0 || c < 0 || r >= height || c >= width) continue;
    fn(static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c));
  }
}

/// Connected-component labels of a mask (0 = background, 1.. in raster order of first pixel).
inline std::vector<std::uint32_t> label_components(const binary_mask& mask, connectivity conn,
                                                   std::uint32_t* count = nullptr) {
  std::vector<std::uint32_t> labels(mask.size(), 0);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || labels[i]) continue;
    labels[i] = ++next;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for_each_neighbor(u, mask.height(), mask.width(), conn, [&](std::size_t v) {
        if (mask[v] && !labels[v]) {
          labels[v] = next;
          stack.push_back(v);
        }
      });
    }
  }
  if (count) *count = next;
  return labels;
}

inline std::uint32_t count_components(const binary_mask& mask, connectivity conn) {
  std::uint32_t n = 0;
  label_components(mask, conn, &n);
  return n;
}

/// Mask of {x : f(x) >= t}.
template <std::floating_point T>
binary_mask superlevel_mask(const grid_field<T>& f, T t) {
  binary_mask m(f.height(), f.width());
  for (std::size_t i = 0; i < f.size(); ++i) m.set(i, f[i] >= t);
  return m;
}

}  // namespace toploc
