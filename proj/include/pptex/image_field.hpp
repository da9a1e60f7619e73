#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pptex/error.hpp"

namespace pptex {

/// Rectangular grid of real intensities, row-major (x = column, y = row).
class ImageField {
 public:
  ImageField() = default;

  ImageField(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), values_(checked_area(width, height), fill) {}

  ImageField(std::size_t width, std::size_t height, std::vector<double> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != checked_area(width, height))
      throw InputError("ImageField: value count " + std::to_string(values_.size()) +
                       " does not match " + std::to_string(width) + "x" +
                       std::to_string(height));
    for (double v : values_)
      if (!std::isfinite(v)) throw InputError("ImageField: non-finite intensity");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(std::size_t x, std::size_t y) const noexcept { return values_[y * width_ + x]; }
  double& operator()(std::size_t x, std::size_t y) noexcept { return values_[y * width_ + x]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool same_shape(const ImageField& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  double sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }
  double mean() const noexcept { return values_.empty() ? 0.0 : sum() / double(values_.size()); }

  friend bool operator==(const ImageField&, const ImageField&) = default;

 private:
  static std::size_t checked_area(std::size_t w, std::size_t h) {
    if (w == 0 || h == 0) throw ConfigError("ImageField: dimensions must be positive");
    if (w > std::numeric_limits<std::size_t>::max() / h)
      throw ConfigError("ImageField: width*height overflows");
    return w * h;
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

/// Pointwise a*f + b.
inline ImageField affine_map(const ImageField& f, double a, double b) {
  ImageField out = f;
  for (double& v : out.values()) v = a * v + b;
  return out;
}

}  // namespace pptex
