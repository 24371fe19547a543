#pragma once

// 0-dimensional persistence of the superlevel-set filtration of a grid field.
//
// Pixels enter in decreasing value order (equal values: ascending row-major
// index). A pixel with no processed neighbor births a component. A pixel that
// touches several components keeps the one born earliest and kills every
// other one, recording (mode, saddle = current pixel). The component that
// survives to the end is the essential class; it is reported with
// death = global minimum so that every mode carries a finite persistence.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <type_traits>
#include <utility>
#include <vector>

#include "toploc/domain.hpp"
#include "toploc/grid.hpp"

namespace toploc {

namespace detail {

/// Unsigned key whose ascending order is the descending order of x. -0 and +0 share a key.
template <class U, std::floating_point T>
U descending_key(T x) {
  constexpr U sign = U{1} << (8 * sizeof(U) - 1);
  const U b = std::bit_cast<U>(static_cast<T>(x + T(0)));
  const U ascending = (b & sign) ? ~b : (b | sign);
  return ~ascending;
}

template <std::floating_point T>
using key_type = std::conditional_t<sizeof(T) <= 4, std::uint32_t, std::uint64_t>;

/// Stable LSD radix sort of `order` by key, 11 bits per pass.
template <class U>
void radix_sort_by_key(std::vector<U>& keys, std::vector<std::uint32_t>& order) {
  constexpr unsigned digit_bits = 11;
  constexpr std::size_t buckets = std::size_t{1} << digit_bits;
  std::vector<U> keys_tmp(keys.size());
  std::vector<std::uint32_t> order_tmp(order.size());
  std::vector<std::size_t> count(buckets);
  for (unsigned shift = 0; shift < 8 * sizeof(U); shift += digit_bits) {
    std::fill(count.begin(), count.end(), 0);
    for (const U k : keys) ++count[(k >> shift) & (buckets - 1)];
    if (std::any_of(count.begin(), count.end(), [&](std::size_t c) { return c == keys.size(); })) continue;
    std::size_t sum = 0;
    for (auto& c : count) sum += std::exchange(c, sum);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const std::size_t slot = count[(keys[i] >> shift) & (buckets - 1)]++;
      keys_tmp[slot] = keys[i];
      order_tmp[slot] = order[i];
    }
    keys.swap(keys_tmp);
    order.swap(order_tmp);
  }
}

/// Sorts `packed` (key << 32 | index) ascending. One scatter on the top 11
/// bits, then two 11-bit LSD passes inside each bucket while it is cache
/// resident; buckets under 1024 entries go to std::sort.
inline void radix_sort_packed(std::vector<std::uint64_t>& packed) {
  constexpr unsigned digit_bits = 11;
  constexpr unsigned top_shift = 64 - digit_bits;
  constexpr std::size_t buckets = std::size_t{1} << digit_bits;
  std::vector<std::uint64_t> tmp(packed.size());
  std::vector<std::size_t> start(buckets + 1);
  for (const auto k : packed) ++start[(k >> top_shift) + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  {
    auto next = start;
    for (const auto k : packed) tmp[next[k >> top_shift]++] = k;
  }
  std::vector<std::size_t> count(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t m = start[b + 1] - start[b];
    std::uint64_t* src = tmp.data() + start[b];
    std::uint64_t* dst = packed.data() + start[b];
    if (m < 1024) {
      std::sort(src, src + m);
      continue;
    }
    for (unsigned shift = 32; shift < top_shift; shift += digit_bits) {
      std::fill(count.begin(), count.end(), 0);
      for (std::size_t i = 0; i < m; ++i) ++count[(src[i] >> shift) & (buckets - 1)];
      std::size_t sum = 0;
      for (auto& c : count) sum += std::exchange(c, sum);
      for (std::size_t i = 0; i < m; ++i) dst[count[(src[i] >> shift) & (buckets - 1)]++] = src[i];
      std::swap(src, dst);
    }
  }
  packed.swap(tmp);
}

/// make(x) for every x in `in`, sorted by `less`, which must order by key
/// first. Entries are scattered by the top 11 bits of their key, then each
/// bucket is sorted on its own.
template <class S, class Make, class Key, class Less>
auto bucket_sorted(const std::vector<S>& in, Make make, Key key, Less less) {
  using E = std::invoke_result_t<Make, const S&>;
  using U = std::invoke_result_t<Key, const E&>;
  constexpr unsigned shift = 8 * sizeof(U) - 11;
  constexpr std::size_t buckets = std::size_t{1} << 11;
  std::vector<E> out;
  if (in.size() < 4096) {
    out.reserve(in.size());
    for (const auto& x : in) out.push_back(make(x));
    std::sort(out.begin(), out.end(), less);
    return out;
  }
  std::vector<std::size_t> start(buckets + 1);
  for (const auto& x : in) ++start[(key(make(x)) >> shift) + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  out.resize(in.size());
  auto next = start;
  for (const auto& x : in) {
    const E e = make(x);
    out[next[key(e) >> shift]++] = e;
  }
  for (std::size_t b = 0; b < buckets; ++b) {
    const auto first = out.begin() + static_cast<std::ptrdiff_t>(start[b]);
    std::sort(first, first + static_cast<std::ptrdiff_t>(start[b + 1] - start[b]), less);
  }
  return out;
}

/// Pixel indices sorted by value descending, ties by index ascending.
template <std::floating_point T>
std::vector<std::uint32_t> filtration_order(const grid_field<T>& f) {
  std::vector<std::uint32_t> order(f.size());
  std::iota(order.begin(), order.end(), 0u);
  const auto v = f.values();
  constexpr bool radix_able = sizeof(T) == 4 || sizeof(T) == 8;
  if constexpr (sizeof(T) == 4) {
    if (f.size() >= 4096) {
      std::vector<std::uint64_t> packed(v.size());
      for (std::size_t i = 0; i < v.size(); ++i)
        packed[i] = std::uint64_t{descending_key<std::uint32_t>(v[i])} << 32 | i;
      radix_sort_packed(packed);
      for (std::size_t i = 0; i < v.size(); ++i) order[i] = static_cast<std::uint32_t>(packed[i]);
      return order;
    }
  } else if constexpr (radix_able) {
    if (f.size() >= 4096) {
      using U = key_type<T>;
      std::vector<U> keys(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) keys[i] = descending_key<U>(v[i]);
      radix_sort_by_key(keys, order);
      return order;
    }
  }
  std::sort(order.begin(), order.end(), [v](std::uint32_t a, std::uint32_t b) {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  });
  return order;
}

template <std::floating_point T>
std::size_t argmin_index(const grid_field<T>& f) {
  const auto v = f.values();
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

/// Persistence descending, then birth descending, then mode index ascending.
template <std::floating_point T>
void sort_diagram(std::vector<persistence_pair<T>>& pairs, std::uint32_t width) {
  if constexpr (sizeof(T) == 4 || sizeof(T) == 8) {
    using U = key_type<T>;
    struct entry {
      U persistence, birth;
      std::uint64_t mode;
      std::uint32_t pos;
    };
    std::vector<entry> keys(pairs.size());
    for (std::uint32_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      keys[i] = {descending_key<U>(p.persistence()), descending_key<U>(p.birth),
                 std::uint64_t{p.mode.row} * width + p.mode.col, i};
    }
    std::sort(keys.begin(), keys.end(), [](const entry& a, const entry& b) {
      if (a.persistence != b.persistence) return a.persistence < b.persistence;
      if (a.birth != b.birth) return a.birth < b.birth;
      return a.mode < b.mode;
    });
    std::vector<persistence_pair<T>> sorted;
    sorted.reserve(pairs.size());
    for (const auto& k : keys) sorted.push_back(pairs[k.pos]);
    pairs.swap(sorted);
  } else {
    const auto linear = [width](const pixel& p) { return std::size_t{p.row} * width + p.col; };
    std::sort(pairs.begin(), pairs.end(), [&](const persistence_pair<T>& a, const persistence_pair<T>& b) {
      const T pa = a.persistence();
      const T pb = b.persistence();
      if (pa != pb) return pa > pb;
      if (a.birth != b.birth) return a.birth > b.birth;
      return linear(a.mode) < linear(b.mode);
    });
  }
}

template <std::floating_point T>
persistence_pair<T> essential_pair(const grid_field<T>& f, std::size_t argmax) {
  const std::size_t argmin = argmin_index(f);
  return {f.to_pixel(argmax), f.to_pixel(argmin), f[argmax], f[argmin], true};
}

template <std::floating_point T>
struct death_event {
  std::uint32_t mode;
  std::uint32_t saddle;
  T birth;
  T death;
};

/// Essential pair plus one pair per death event, in diagram order.
template <std::floating_point T>
persistence_diagram<T> assemble_diagram(const grid_field<T>& f, const std::vector<death_event<T>>& deaths,
                                        std::size_t argmax) {
  persistence_diagram<T> out;
  out.pairs.reserve(deaths.size() + 1);
  out.pairs.push_back(essential_pair(f, argmax));
  if constexpr (sizeof(T) == 4 || sizeof(T) == 8) {
    // The essential pair has the largest persistence and, among equals, the
    // largest birth and the smallest mode index, so it always leads.
    using U = key_type<T>;
    struct entry {
      U persistence, birth;
      death_event<T> event;
    };
    const auto keys = bucket_sorted(
        deaths,
        [](const death_event<T>& d) {
          return entry{descending_key<U>(static_cast<T>(d.birth - d.death)), descending_key<U>(d.birth), d};
        },
        [](const entry& e) { return e.persistence; },
        [](const entry& a, const entry& b) {
          if (a.persistence != b.persistence) return a.persistence < b.persistence;
          if (a.birth != b.birth) return a.birth < b.birth;
          return a.event.mode < b.event.mode;
        });
    const std::uint32_t w = f.width();
    for (const auto& k : keys) {
      const auto& e = k.event;
      out.pairs.push_back({{e.mode / w, e.mode % w}, {e.saddle / w, e.saddle % w}, e.birth, e.death, false});
    }
  } else {
    for (const auto& e : deaths)
      out.pairs.push_back({f.to_pixel(e.mode), f.to_pixel(e.saddle), e.birth, e.death, false});
    sort_diagram(out.pairs, f.width());
  }
  return out;
}

}  // namespace detail

template <std::floating_point T>
persistence_diagram<T> compute_persistence(const grid_field<T>& f, connectivity conn = connectivity::four) {
  if (f.size() == 0) throw error("compute_persistence: empty field");
  if (f.size() >= std::numeric_limits<std::uint32_t>::max()) throw error("compute_persistence: field too large");

  constexpr std::uint32_t unvisited = std::numeric_limits<std::uint32_t>::max();
  const auto order = detail::filtration_order(f);
  const std::uint32_t h = f.height();
  const std::uint32_t w = f.width();

  // Union-find with the value stored beside the parent link. Older components
  // absorb younger ones, so every root is its component's mode pixel.
  struct cell {
    T value;
    std::uint32_t parent;
  };
  std::vector<cell> cells(f.size());
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = {f[i], unvisited};
  const auto find = [&cells](std::uint32_t x) {
    while (cells[x].parent != x) {
      cells[x].parent = cells[cells[x].parent].parent;
      x = cells[x].parent;
    }
    return x;
  };
  const auto older = [&cells](std::uint32_t a, std::uint32_t b) {
    return cells[a].value > cells[b].value || (cells[a].value == cells[b].value && a < b);
  };

  std::vector<detail::death_event<T>> deaths;
  deaths.reserve(f.size() / 4 + 1);
  std::array<std::uint32_t, 8> roots{};
  constexpr std::size_t lookahead = 8;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::uint32_t u = order[rank];
#if defined(__GNUC__)
    if (rank + lookahead < order.size()) {
      const std::uint32_t next = order[rank + lookahead];
      __builtin_prefetch(&cells[next]);
      if (next >= w) __builtin_prefetch(&cells[next - w]);
      if (next + w < cells.size()) __builtin_prefetch(&cells[next + w]);
    }
#endif
    std::size_t n_roots = 0;
    for_each_neighbor(u, h, w, conn, [&](std::size_t v) {
      if (cells[v].parent == unvisited) return;
      const std::uint32_t r = find(static_cast<std::uint32_t>(v));
      for (std::size_t k = 0; k < n_roots; ++k)
        if (roots[k] == r) return;
      roots[n_roots++] = r;
    });

    if (n_roots == 0) {
      cells[u].parent = u;
      continue;
    }

    std::uint32_t survivor = roots[0];
    for (std::size_t k = 1; k < n_roots; ++k)
      if (older(roots[k], survivor)) survivor = roots[k];
    for (std::size_t k = 0; k < n_roots; ++k) {
      const std::uint32_t m = roots[k];
      if (m == survivor) continue;
      deaths.push_back({m, u, cells[m].value, cells[u].value});
      cells[m].parent = survivor;
    }
    cells[u].parent = survivor;
  }

  return detail::assemble_diagram(f, deaths, order.front());
}

template <std::floating_point T>
struct split_pairs {
  std::vector<persistence_pair<T>> selected;
  std::vector<persistence_pair<T>> rejected;
};

/// Splits a diagram into its first min(c, |d|) pairs and the remainder.
template <std::floating_point T>
split_pairs<T> split_top_c(const persistence_diagram<T>& d, std::size_t c) {
  const std::size_t k = std::min(c, d.pairs.size());
  split_pairs<T> s;
  s.selected.assign(d.pairs.begin(), d.pairs.begin() + static_cast<std::ptrdiff_t>(k));
  s.rejected.assign(d.pairs.begin() + static_cast<std::ptrdiff_t>(k), d.pairs.end());
  return s;
}

}  // namespace toploc
