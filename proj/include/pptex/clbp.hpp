#pragma once

// Completed local binary patterns, sign (S) and magnitude (M) components,
// with the rotation-invariant uniform (riu2) mapping: patterns with at most
// two circular 0/1 transitions map to their ones-count 0..P, every other
// pattern to P+1.

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pptex/error.hpp"
#include "pptex/image_field.hpp"

namespace pptex {

enum class LbpKind { Sign, Magnitude };

inline const char* to_string(LbpKind k) { return k == LbpKind::Sign ? "S" : "M"; }

/// Four-tap bilinear stencil relative to the center pixel.
struct BilinearStencil {
  std::array<int, 4> dx{};
  std::array<int, 4> dy{};
  std::array<double, 4> weight{};
  double tx = 0.0;  // fractional offsets, x then y
  double ty = 0.0;
};

struct NeighborhoodSpec {
  int P = 0;
  double R = 0.0;
  std::vector<std::pair<double, double>> offsets;  // (dx, dy), dy grows downward
  std::vector<BilinearStencil> stencils;

  /// Pixels closer than this to the border have no complete neighborhood.
  std::size_t margin() const noexcept { return static_cast<std::size_t>(std::ceil(R)); }
  std::size_t bins() const noexcept { return static_cast<std::size_t>(P) + 2; }
};

namespace detail {

inline constexpr double kSnapTolerance = 1e-9;

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= kSnapTolerance ? r : v;
}

inline int ceil_int(double v) { return static_cast<int>(std::ceil(v)); }

}  // namespace detail

/// Neighbor p sits at (R cos(2 pi p / P), R sin(2 pi p / P)).
inline NeighborhoodSpec build_spec(int P, double R) {
  if (P < 4 || P > 64) throw ConfigError("build_spec: P must be in [4, 64], got " + std::to_string(P));
  if (!(R >= 1.0) || !std::isfinite(R)) throw ConfigError("build_spec: R must be >= 1");
  NeighborhoodSpec spec;
  spec.P = P;
  spec.R = R;
  spec.offsets.reserve(P);
  spec.stencils.reserve(P);
  for (int p = 0; p < P; ++p) {
    const double angle = 2.0 * std::numbers::pi * double(p) / double(P);
    const double dx = detail::snap(R * std::cos(angle));
    const double dy = detail::snap(R * std::sin(angle));
    spec.offsets.emplace_back(dx, dy);

    const double fx0 = std::floor(dx), fy0 = std::floor(dy);
    const double tx = dx - fx0, ty = dy - fy0;
    const int x0 = int(fx0), y0 = int(fy0);
    // An exact-integer coordinate collapses both taps onto the same pixel so
    // the stencil never reaches past the margin.
    const int x1 = tx == 0.0 ? x0 : x0 + 1;
    const int y1 = ty == 0.0 ? y0 : y0 + 1;
    BilinearStencil s;
    s.dx = {x0, x1, x0, x1};
    s.dy = {y0, y0, y1, y1};
    s.weight = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    s.tx = tx;
    s.ty = ty;
    spec.stencils.push_back(s);
  }
  return spec;
}

namespace detail {

// Nested lerp; exact on locally constant data.
inline double sample(const ImageField& f, std::size_t x, std::size_t y, const BilinearStencil& s) {
  auto at = [&](int t) {
    return f(std::size_t(std::ptrdiff_t(x) + s.dx[t]), std::size_t(std::ptrdiff_t(y) + s.dy[t]));
  };
  const double v00 = at(0);
  const double top = s.tx == 0.0 ? v00 : v00 + s.tx * (at(1) - v00);
  if (s.ty == 0.0) return top;
  const double v01 = at(2);
  const double bottom = s.tx == 0.0 ? v01 : v01 + s.tx * (at(3) - v01);
  return top + s.ty * (bottom - top);
}

inline bool in_valid_region(const ImageField& f, std::size_t x, std::size_t y,
                            const NeighborhoodSpec& spec) {
  const std::size_t m = spec.margin();
  return x >= m && y >= m && x + m < f.width() && y + m < f.height();
}

inline std::uint64_t low_mask(int P) {
  return P >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << P) - 1;
}

}  // namespace detail

inline std::vector<double> sample_neighbors(const ImageField& field, std::size_t x, std::size_t y,
                                            const NeighborhoodSpec& spec) {
  detail::require(detail::in_valid_region(field, x, y, spec),
                  "sample_neighbors: (" + std::to_string(x) + "," + std::to_string(y) +
                      ") outside the valid region");
  std::vector<double> out(spec.stencils.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = detail::sample(field, x, y, spec.stencils[p]);
  return out;
}

/// Circular 0/1 transitions of the low P bits of `bits`.
inline int uniformity(std::uint64_t bits, int P) {
  const std::uint64_t mask = detail::low_mask(P);
  bits &= mask;
  const std::uint64_t rotated = ((bits >> 1) | (bits << (P - 1))) & mask;
  return std::popcount(bits ^ rotated);
}

inline int uniformity(std::span<const bool> bits) {
  detail::require(bits.size() >= 2, "uniformity: need at least two bits");
  const std::size_t P = bits.size();
  int u = bits[P - 1] != bits[0] ? 1 : 0;
  for (std::size_t p = 1; p < P; ++p) u += bits[p] != bits[p - 1] ? 1 : 0;
  return u;
}

/// riu2 bin of a P-bit pattern.
inline int riu2_bin(std::uint64_t bits, int P) {
  bits &= detail::low_mask(P);
  return uniformity(bits, P) <= 2 ? std::popcount(bits) : P + 1;
}

inline int sign_code(double center, std::span<const double> neighbors) {
  const int P = int(neighbors.size());
  std::uint64_t bits = 0;
  for (int p = 0; p < P; ++p)
    if (neighbors[p] - center >= 0.0) bits |= std::uint64_t{1} << p;
  return riu2_bin(bits, P);
}

inline int magnitude_code(double center, std::span<const double> neighbors, double C) {
  detail::require(C >= 0.0, "magnitude_code: threshold must be >= 0");
  const int P = int(neighbors.size());
  std::uint64_t bits = 0;
  for (int p = 0; p < P; ++p)
    if (std::abs(neighbors[p] - center) >= C) bits |= std::uint64_t{1} << p;
  return riu2_bin(bits, P);
}

/// g_p - g_c for every valid-region pixel (raster order) and every p.
struct LocalDifferences {
  std::size_t pixel_count = 0;
  std::vector<double> diffs;  // pixel-major, P per pixel
};

inline LocalDifferences local_differences(const ImageField& field, const NeighborhoodSpec& spec) {
  const std::size_t m = spec.margin();
  if (field.width() < 2 * m + 1 || field.height() < 2 * m + 1)
    throw InputError("CLBP: " + std::to_string(field.width()) + "x" +
                     std::to_string(field.height()) + " image has no pixel with a complete radius-" +
                     std::to_string(spec.R) + " neighborhood");
  const std::size_t P = spec.stencils.size();
  LocalDifferences out;
  out.pixel_count = (field.width() - 2 * m) * (field.height() - 2 * m);
  out.diffs.resize(out.pixel_count * P);
  double* d = out.diffs.data();
  for (std::size_t y = m; y + m < field.height(); ++y)
    for (std::size_t x = m; x + m < field.width(); ++x) {
      const double c = field(x, y);
      for (std::size_t p = 0; p < P; ++p) *d++ = detail::sample(field, x, y, spec.stencils[p]) - c;
    }
  return out;
}

inline double mean_abs_difference(const LocalDifferences& ld) {
  double s = 0.0;
  for (double v : ld.diffs) s += std::abs(v);
  return s / double(ld.diffs.size());
}

/// Threshold C: mean |g_p - g_c| over the valid region and all p.
inline double magnitude_threshold(const ImageField& field, const NeighborhoodSpec& spec) {
  return mean_abs_difference(local_differences(field, spec));
}

struct LbpHistogram {
  NeighborhoodSpec spec;
  LbpKind kind = LbpKind::Sign;
  std::vector<double> bins;  // P+2 entries, unit sum
  std::size_t pixel_count = 0;
};

/// Sign and magnitude histograms of one field sharing a single sampling pass.
inline std::pair<LbpHistogram, LbpHistogram> clbp_histograms(const ImageField& field,
                                                             const NeighborhoodSpec& spec) {
  const LocalDifferences ld = local_differences(field, spec);
  const int P = spec.P;
  const double C = mean_abs_difference(ld);

  std::vector<std::size_t> s_count(spec.bins(), 0), m_count(spec.bins(), 0);
  const double* d = ld.diffs.data();
  for (std::size_t i = 0; i < ld.pixel_count; ++i, d += P) {
    std::uint64_t sbits = 0, mbits = 0;
    for (int p = 0; p < P; ++p) {
      if (d[p] >= 0.0) sbits |= std::uint64_t{1} << p;
      if (std::abs(d[p]) >= C) mbits |= std::uint64_t{1} << p;
    }
    ++s_count[riu2_bin(sbits, P)];
    ++m_count[riu2_bin(mbits, P)];
  }

  auto normalize = [&](const std::vector<std::size_t>& counts, LbpKind kind) {
    LbpHistogram h{spec, kind, std::vector<double>(counts.size()), ld.pixel_count};
    for (std::size_t b = 0; b < counts.size(); ++b) h.bins[b] = double(counts[b]) / double(ld.pixel_count);
    return h;
  };
  return {normalize(s_count, LbpKind::Sign), normalize(m_count, LbpKind::Magnitude)};
}

inline LbpHistogram histogram(const ImageField& field, const NeighborhoodSpec& spec, LbpKind kind) {
  auto both = clbp_histograms(field, spec);
  return kind == LbpKind::Sign ? std::move(both.first) : std::move(both.second);
}

}  // namespace pptex
