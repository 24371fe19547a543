#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "toploc/persistence.hpp"
#include "toploc/persistence_oracle.hpp"

using namespace toploc;
using toploc::testing::random_field;

namespace {

persistence_pair<double> finite(pixel m, pixel s, double b, double d) { return {m, s, b, d, false}; }

}  // namespace

TEST(Persistence, SinglePixel) {
  const auto d = compute_persistence(make_field<double>(1, 1, {0.7}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d.pairs[0].essential);
  EXPECT_EQ(d.pairs[0].birth, 0.7);
  EXPECT_EQ(d.pairs[0].death, 0.7);
  EXPECT_EQ(d.pairs[0].persistence(), 0.0);
}

TEST(Persistence, ConstantField) {
  const auto f = grid_field<double>::filled(3, 3, 0.5);
  for (auto conn : {connectivity::four, connectivity::eight}) {
    const auto d = compute_persistence(f, conn);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_TRUE(d.pairs[0].essential);
    EXPECT_EQ(d.pairs[0].mode, (pixel{0, 0}));
    EXPECT_EQ(d.pairs[0].saddle, (pixel{0, 0}));
    EXPECT_EQ(d.pairs[0].birth, 0.5);
    EXPECT_EQ(d.pairs[0].death, 0.5);
  }
}

TEST(Persistence, OneRowThreeModes) {
  const auto f = make_field<double>(1, 5, {0.9, 0.1, 0.8, 0.2, 0.7});
  const auto d = compute_persistence(f, connectivity::four);
  // Hand filtration: 0.7 dies entering 0.2, 0.8 dies entering 0.1.
  const persistence_diagram<double> want{{
      {{0, 0}, {0, 1}, 0.9, 0.1, true},
      finite({0, 2}, {0, 1}, 0.8, 0.1),
      finite({0, 4}, {0, 3}, 0.7, 0.2),
  }};
  EXPECT_EQ(d, want);
  EXPECT_EQ(d, brute_force_persistence(f, connectivity::four));
  EXPECT_NEAR(d.pairs[0].persistence(), 0.8, 1e-12);
  EXPECT_NEAR(d.pairs[1].persistence(), 0.7, 1e-12);
  EXPECT_NEAR(d.pairs[2].persistence(), 0.5, 1e-12);
}

TEST(Persistence, TwoByTwoFourConnected) {
  const auto f = make_field<double>(2, 2, {0.9, 0.2, 0.3, 0.8});
  const auto d = compute_persistence(f, connectivity::four);
  const persistence_diagram<double> want{{
      {{0, 0}, {0, 1}, 0.9, 0.2, true},
      finite({1, 1}, {1, 0}, 0.8, 0.3),
  }};
  EXPECT_EQ(d, want);
  EXPECT_EQ(d, brute_force_persistence(f, connectivity::four));
}

TEST(Persistence, TwoByTwoEightConnectedHasOnlyEssential) {
  const auto f = make_field<double>(2, 2, {0.9, 0.2, 0.3, 0.8});
  const auto d = compute_persistence(f, connectivity::eight);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d.pairs[0].essential);
  EXPECT_EQ(d, brute_force_persistence(f, connectivity::eight));
}

TEST(Persistence, DiagramInvariants) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = random_field(rng, 1 + rng() % 12, 1 + rng() % 12, trial % 2 == 0);
    const auto d = compute_persistence(f, trial % 3 ? connectivity::four : connectivity::eight);
    EXPECT_EQ(std::count_if(d.pairs.begin(), d.pairs.end(), [](const auto& p) { return p.essential; }), 1);
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_GE(d.pairs[i].birth, d.pairs[i].death);
      if (i) {
        EXPECT_GE(d.pairs[i - 1].persistence(), d.pairs[i].persistence());
      }
    }
  }
}

TEST(Persistence, ModesMatchStrictLocalMaxima) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t h = 1 + rng() % 10, w = 1 + rng() % 10;
    const auto f = random_field(rng, h, w, false);  // continuous: distinct with probability 1
    for (auto conn : {connectivity::four, connectivity::eight}) {
      std::size_t maxima = 0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        bool is_max = true;
        for_each_neighbor(i, h, w, conn, [&](std::size_t j) { is_max = is_max && f[j] < f[i]; });
        maxima += is_max;
      }
      EXPECT_EQ(compute_persistence(f, conn).size(), maxima);
    }
  }
}

TEST(Persistence, ShiftAndScaleKeepCriticalPixels) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_field(rng, 1 + rng() % 8, 1 + rng() % 8, trial % 2 == 0);
    const auto d = compute_persistence(f);
    for (const auto& [shift, scale] : {std::pair{2.0, 1.0}, std::pair{0.0, 4.0}, std::pair{-8.0, 0.5}}) {
      std::vector<double> v(f.values().begin(), f.values().end());
      for (auto& x : v) x = x * scale + shift;
      const auto g = make_field(f.height(), f.width(), v);
      auto a = d.pairs;
      auto b = compute_persistence(g).pairs;
      ASSERT_EQ(a.size(), b.size());
      // Rounding after a shift can reorder pairs of equal persistence.
      const auto by_mode = [&](const auto& x, const auto& y) { return f.index(x.mode) < f.index(y.mode); };
      std::sort(a.begin(), a.end(), by_mode);
      std::sort(b.begin(), b.end(), by_mode);
      for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mode, b[i].mode);
        EXPECT_EQ(a[i].saddle, b[i].saddle);
        EXPECT_NEAR(b[i].birth, a[i].birth * scale + shift, 1e-12);
        EXPECT_NEAR(b[i].persistence(), a[i].persistence() * scale, 1e-12);
      }
    }
  }
}

TEST(Persistence, OracleAgreesOnSmallFields) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto f = random_field(rng, 1 + rng() % 8, 1 + rng() % 8, trial % 2 == 0);
    for (auto conn : {connectivity::four, connectivity::eight})
      ASSERT_EQ(compute_persistence(f, conn), brute_force_persistence(f, conn)) << "trial " << trial;
  }
}

TEST(Persistence, FloatFields) {
  const auto f = make_field<float>(1, 5, {0.9f, 0.1f, 0.8f, 0.2f, 0.7f});
  const auto d = compute_persistence(f);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d, brute_force_persistence(f));
  EXPECT_EQ(d.pairs[2].mode, (pixel{0, 4}));
}

namespace {

template <class T>
std::vector<T> mixed_values(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<T> v(n);
  for (auto& x : v) {
    switch (rng() % 5) {
      case 0: x = static_cast<T>(u(rng)); break;
      case 1: x = static_cast<T>(std::floor(u(rng) * 4) / 4); break;
      case 2: x = static_cast<T>(-std::ldexp(u(rng), int(rng() % 40) - 20)); break;
      case 3: x = (rng() % 2) ? T(0) : -T(0); break;
      default: x = static_cast<T>(0.5 + u(rng) / 2); break;
    }
  }
  return v;
}

template <class T>
void expect_order_matches_stable_sort(std::uint32_t h, std::uint32_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const grid_field<T> f(h, w, mixed_values<T>(rng, std::size_t(h) * w));
  std::vector<std::uint32_t> want(f.size());
  std::iota(want.begin(), want.end(), 0u);
  const auto v = f.values();
  std::stable_sort(want.begin(), want.end(), [&](std::uint32_t a, std::uint32_t b) { return v[a] > v[b]; });
  EXPECT_EQ(detail::filtration_order(f), want) << h << "x" << w;
}

}  // namespace

TEST(Persistence, FiltrationOrderOnLargeFields) {
  expect_order_matches_stable_sort<float>(64, 64, 1);
  expect_order_matches_stable_sort<float>(300, 301, 2);
  expect_order_matches_stable_sort<double>(64, 70, 3);
  expect_order_matches_stable_sort<double>(211, 190, 4);
  expect_order_matches_stable_sort<float>(63, 65, 5);
}

TEST(Persistence, OracleAgreesOnRadixSizedFields) {
  std::mt19937_64 rng(23);
  const grid_field<float> f(64, 72, mixed_values<float>(rng, 64 * 72));
  for (auto conn : {connectivity::four, connectivity::eight})
    EXPECT_EQ(compute_persistence(f, conn), brute_force_persistence(f, conn));
}

TEST(SplitTopC, Cases) {
  const auto d = compute_persistence(make_field<double>(1, 5, {0.9, 0.1, 0.8, 0.2, 0.7}));
  auto s = split_top_c(d, 1);
  ASSERT_EQ(s.selected.size(), 1u);
  EXPECT_TRUE(s.selected[0].essential);
  EXPECT_EQ(s.rejected.size(), 2u);

  s = split_top_c(d, 0);
  EXPECT_TRUE(s.selected.empty());
  EXPECT_EQ(s.rejected.size(), 3u);

  s = split_top_c(d, 10);
  EXPECT_EQ(s.selected.size(), 3u);
  EXPECT_TRUE(s.rejected.empty());
}
