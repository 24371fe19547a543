#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace toploc {

/// Raised for any input that violates a documented invariant.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class connectivity { four = 4, eight = 8 };

inline connectivity connectivity_from_int(int k) {
  if (k == 4) return connectivity::four;
  if (k == 8) return connectivity::eight;
  throw error("connectivity must be 4 or 8, got " + std::to_string(k));
}

struct pixel {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const pixel&, const pixel&) = default;
};

struct shape {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  friend bool operator==(const shape&, const shape&) = default;
  std::size_t size() const { return std::size_t{height} * width; }
  std::string str() const { return std::to_string(height) + "x" + std::to_string(width); }
};

/// Dense row-major scalar field. Likelihood maps and gradients both use it.
template <std::floating_point T>
class grid_field {
 public:
  using value_type = T;

  grid_field() = default;

  /// Validating constructor: shape must match and every value must be finite.
  grid_field(std::uint32_t height, std::uint32_t width, std::vector<T> values)
      : shape_{height, width}, values_(std::move(values)) {
    if (height == 0 || width == 0)
      throw error("field dimensions must be positive, got " + shape_.str());
    if (values_.size() != shape_.size())
      throw error("dimension mismatch: " + shape_.str() + " needs " + std::to_string(shape_.size()) +
                  " values, got " + std::to_string(values_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i])) throw error("non-finite value at index " + std::to_string(i));
  }

  static grid_field filled(std::uint32_t height, std::uint32_t width, T value) {
    return grid_field(height, width, std::vector<T>(std::size_t{height} * width, value));
  }

  std::uint32_t height() const { return shape_.height; }
  std::uint32_t width() const { return shape_.width; }
  toploc::shape dims() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  std::span<const T> values() const { return values_; }
  T operator[](std::size_t i) const { return values_[i]; }
  T operator()(std::uint32_t row, std::uint32_t col) const { return values_[index(row, col)]; }
  std::size_t index(std::uint32_t row, std::uint32_t col) const {
    return std::size_t{row} * shape_.width + col;
  }
  std::size_t index(pixel p) const { return index(p.row, p.col); }
  pixel to_pixel(std::size_t i) const {
    return {static_cast<std::uint32_t>(i / shape_.width), static_cast<std::uint32_t>(i % shape_.width)};
  }

  /// Throws unless every value lies in [0, 1].
  void require_unit_range(const char* what) const {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i] < T(0) || values_[i] > T(1))
        throw error(std::string(what) + ": value " + std::to_string(values_[i]) + " at index " +
                    std::to_string(i) + " outside [0, 1]");
  }

  template <std::floating_point U>
  grid_field<U> cast() const {
    return grid_field<U>(shape_.height, shape_.width, std::vector<U>(values_.begin(), values_.end()));
  }

  friend bool operator==(const grid_field&, const grid_field&) = default;

 private:
  toploc::shape shape_{};
  std::vector<T> values_;
};

template <std::floating_point T>
grid_field<T> make_field(std::uint32_t height, std::uint32_t width, std::vector<T> values) {
  return grid_field<T>(height, width, std::move(values));
}

using field = grid_field<float>;

class binary_mask {
 public:
  binary_mask() = default;
  binary_mask(std::uint32_t height, std::uint32_t width)
      : shape_{height, width}, bits_(shape_.size(), 0) {
    if (height == 0 || width == 0) throw error("mask dimensions must be positive, got " + shape_.str());
  }
  binary_mask(std::uint32_t height, std::uint32_t width, std::vector<std::uint8_t> bits)
      : shape_{height, width}, bits_(std::move(bits)) {
    if (height == 0 || width == 0) throw error("mask dimensions must be positive, got " + shape_.str());
    if (bits_.size() != shape_.size())
      throw error("dimension mismatch: mask " + shape_.str() + " got " + std::to_string(bits_.size()) + " bits");
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  std::uint32_t height() const { return shape_.height; }
  std::uint32_t width() const { return shape_.width; }
  toploc::shape dims() const { return shape_; }
  std::size_t size() const { return bits_.size(); }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool operator()(std::uint32_t row, std::uint32_t col) const {
    return bits_[std::size_t{row} * shape_.width + col] != 0;
  }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
  void set_at(std::uint32_t row, std::uint32_t col, bool v = true) {
    bits_[std::size_t{row} * shape_.width + col] = v ? 1 : 0;
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  /// Indicator field: 1 on the mask, 0 elsewhere.
  template <std::floating_point T = float>
  grid_field<T> to_field() const {
    std::vector<T> v(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) v[i] = bits_[i] ? T(1) : T(0);
    return grid_field<T>(shape_.height, shape_.width, std::move(v));
  }

  friend bool operator==(const binary_mask&, const binary_mask&) = default;

 private:
  toploc::shape shape_{};
  std::vector<std::uint8_t> bits_;
};

// x is the column coordinate, y the row coordinate; origin at the top-left pixel center.
struct point {
  double x = 0;
  double y = 0;
  friend bool operator==(const point&, const point&) = default;
};

struct box {
  double w = 0;
  double h = 0;
  friend bool operator==(const box&, const box&) = default;
};

class dot_annotation {
 public:
  dot_annotation() = default;
  explicit dot_annotation(std::vector<point> points, std::optional<std::vector<box>> boxes = std::nullopt)
      : points_(std::move(points)), boxes_(std::move(boxes)) {
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (!std::isfinite(points_[i].x) || !std::isfinite(points_[i].y))
        throw error("non-finite dot coordinate at index " + std::to_string(i));
    if (boxes_) {
      if (boxes_->size() != points_.size())
        throw error("length mismatch: " + std::to_string(points_.size()) + " points but " +
                    std::to_string(boxes_->size()) + " boxes");
      for (std::size_t i = 0; i < boxes_->size(); ++i) {
        const auto& b = (*boxes_)[i];
        if (!(b.w > 0) || !(b.h > 0) || !std::isfinite(b.w) || !std::isfinite(b.h))
          throw error("non-positive box dimension at index " + std::to_string(i));
      }
    }
  }

  std::span<const point> points() const { return points_; }
  bool has_boxes() const { return boxes_.has_value(); }
  std::span<const box> boxes() const {
    if (!boxes_) return {};
    return *boxes_;
  }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Throws if any dot lies outside [0, width) x [0, height).
  void require_inside(std::uint32_t height, std::uint32_t width) const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)
        throw error("dot " + std::to_string(i) + " at (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                    ") outside " + shape{height, width}.str() + " image");
    }
  }

  friend bool operator==(const dot_annotation&, const dot_annotation&) = default;

 private:
  std::vector<point> points_;
  std::optional<std::vector<box>> boxes_;
};

inline dot_annotation make_annotation(std::vector<point> points,
                                      std::optional<std::vector<box>> boxes = std::nullopt) {
  return dot_annotation(std::move(points), std::move(boxes));
}

/// Points inside the half-open rectangle [x0, x1) x [y0, y1).
inline std::size_t count_in_rect(std::span<const point> points, double x0, double y0, double x1, double y1) {
  if (x1 < x0 || y1 < y0) throw error("inverted rectangle");
  std::size_t n = 0;
  for (const auto& p : points)
    if (p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1) ++n;
  return n;
}

inline std::size_t count_in_rect(const dot_annotation& ann, double x0, double y0, double x1, double y1) {
  return count_in_rect(ann.points(), x0, y0, x1, y1);
}

template <std::floating_point T>
struct persistence_pair {
  pixel mode;
  pixel saddle;
  T birth = 0;
  T death = 0;
  bool essential = false;

  T persistence() const { return birth - death; }
  friend bool operator==(const persistence_pair&, const persistence_pair&) = default;
};

/// Pairs ordered by persistence descending, then birth descending, then mode index ascending.
template <std::floating_point T>
struct persistence_diagram {
  std::vector<persistence_pair<T>> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const persistence_diagram&, const persistence_diagram&) = default;
};

/// Where the loss puts the death of a tile's essential component: at the
/// tile's minimum pixel, or at 0, the floor of the likelihood range. With
/// `zero` the essential pair only moves its mode.
enum class essential_death { field_min, zero };

struct loss_config {
  double lambda_pers = 1.0;
  std::uint32_t patch_size = 50;
  toploc::connectivity connectivity = connectivity::four;
  std::uint64_t rng_seed = 0;
  toploc::essential_death essential = essential_death::field_min;

  void validate() const {
    if (!(lambda_pers >= 0) || !std::isfinite(lambda_pers)) throw error("lambda_pers must be finite and >= 0");
    if (patch_size < 1) throw error("patch_size must be >= 1");
  }
};

}  // namespace toploc
