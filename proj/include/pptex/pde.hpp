#pragma once

// Implicit time stepping of the linear pseudo-parabolic equation
//
//     u_t = div( grad(u + tau * u_t) )
//
// on a pixel grid (unit spacing) with zero flux across the image border.
// Backward Euler in time with the cell-centered 5-point flux Laplacian L
// gives, per step,
//
//     (I - (dt + tau) L) u^{n+1} = (I - tau L) u^n.
//
// The left operator is SPD and depends only on the grid size, so it is
// factored once and reused for every step and every image of that size.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pptex/banded_cholesky.hpp"
#include "pptex/error.hpp"
#include "pptex/image_field.hpp"

namespace pptex {

struct SolverConfig {
  double tau = 5.0;       // damping coefficient
  double dt = 1.0;        // time step
  std::size_t steps = 50; // frames after the initial one

  void validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("SolverConfig: tau must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("SolverConfig: dt must be > 0");
  }
};

namespace detail {

// out = u - coef * L u, with L the zero-flux 5-point Laplacian. Missing
// faces at the border contribute no flux.
inline void apply_shifted_laplacian(std::span<const double> u, std::size_t w, std::size_t h,
                                    double identity, double coef, std::span<double> out) {
  for (std::size_t y = 0; y < h; ++y) {
    const double* row = u.data() + y * w;
    const double* up = y > 0 ? row - w : nullptr;
    const double* down = y + 1 < h ? row + w : nullptr;
    double* o = out.data() + y * w;
    for (std::size_t x = 0; x < w; ++x) {
      const double c = row[x];
      double lap = 0.0;
      if (x > 0) lap += row[x - 1] - c;
      if (x + 1 < w) lap += row[x + 1] - c;
      if (up) lap += up[x] - c;
      if (down) lap += down[x] - c;
      o[x] = identity * c - coef * lap;
    }
  }
}

}  // namespace detail

/// 5-point zero-flux Laplacian: sum of neighbor differences over present faces.
inline ImageField laplacian_apply(const ImageField& field) {
  ImageField out(field.width(), field.height());
  detail::apply_shifted_laplacian(field.values(), field.width(), field.height(), 0.0, -1.0,
                                  out.values());
  return out;
}

/// The operator I - coef * L on a fixed grid.
class StencilOperator {
 public:
  StencilOperator() = default;
  StencilOperator(std::size_t width, std::size_t height, double coef)
      : width_(width), height_(height), coef_(coef) {}

  double coefficient() const noexcept { return coef_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  void apply(std::span<const double> u, std::span<double> out) const {
    detail::require(u.size() == width_ * height_ && out.size() == u.size(),
                    "StencilOperator::apply: size mismatch");
    detail::apply_shifted_laplacian(u, width_, height_, 1.0, coef_, out);
  }

  ImageField apply(const ImageField& f) const {
    detail::require(f.width() == width_ && f.height() == height_,
                    "StencilOperator::apply: shape mismatch");
    ImageField out(width_, height_);
    apply(f.values(), out.values());
    return out;
  }

  /// Matrix entry between cells p and q (row-major cell indices).
  double entry(std::size_t p, std::size_t q) const noexcept {
    const std::size_t px = p % width_, py = p / width_;
    const std::size_t qx = q % width_, qy = q / width_;
    if (p == q) return 1.0 + coef_ * double(degree(px, py));
    const std::size_t dx = px > qx ? px - qx : qx - px;
    const std::size_t dy = py > qy ? py - qy : qy - py;
    return dx + dy == 1 ? -coef_ : 0.0;
  }

 private:
  std::size_t degree(std::size_t x, std::size_t y) const noexcept {
    return std::size_t(x > 0) + std::size_t(x + 1 < width_) + std::size_t(y > 0) +
           std::size_t(y + 1 < height_);
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  double coef_ = 0.0;
};

/// A u^{n+1} = B u^n with A = I - (dt+tau) L, B = I - tau L, plus a Cholesky
/// factor of A. Immutable after construction; share freely across threads.
class PseudoParabolicSystem {
 public:
  PseudoParabolicSystem(std::size_t width, std::size_t height, const SolverConfig& config)
      : width_(width), height_(height), config_(config) {
    config.validate();
    if (width == 0 || height == 0) throw ConfigError("assemble_system: dimensions must be >= 1");
    if (width > std::numeric_limits<std::size_t>::max() / height)
      throw ConfigError("assemble_system: width*height overflows");
    A_ = StencilOperator(width, height, config.dt + config.tau);
    B_ = StencilOperator(width, height, config.tau);

    // Number cells along the shorter side so the half-bandwidth is min(w, h).
    column_major_ = width > height;
    const std::size_t n = width * height;
    const std::size_t band = column_major_ ? height : width;
    factor_ = BandedCholesky(n, band, [this](std::size_t i, std::size_t j) {
      return A_.entry(to_cell(i), to_cell(j));
    });
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  const SolverConfig& config() const noexcept { return config_; }
  const StencilOperator& A() const noexcept { return A_; }
  const StencilOperator& B() const noexcept { return B_; }
  const BandedCholesky& factorization() const noexcept { return factor_; }

  /// Solves A x = rhs in place (rhs in row-major cell order). scratch is
  /// resized as needed and may be reused between calls.
  void solve_in_place(std::span<double> rhs, std::vector<double>& scratch) const {
    detail::require(rhs.size() == width_ * height_, "solve_in_place: size mismatch");
    if (!column_major_) {
      factor_.solve_in_place(rhs);
      return;
    }
    scratch.resize(rhs.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) scratch[i] = rhs[to_cell(i)];
    factor_.solve_in_place(scratch);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[to_cell(i)] = scratch[i];
  }

 private:
  // solver ordering index -> row-major cell index
  std::size_t to_cell(std::size_t i) const noexcept {
    if (!column_major_) return i;
    const std::size_t x = i / height_, y = i % height_;
    return y * width_ + x;
  }

  std::size_t width_;
  std::size_t height_;
  SolverConfig config_;
  StencilOperator A_;
  StencilOperator B_;
  BandedCholesky factor_;
  bool column_major_ = false;
};

inline PseudoParabolicSystem assemble_system(std::size_t width, std::size_t height,
                                             const SolverConfig& config) {
  return PseudoParabolicSystem(width, height, config);
}

/// One implicit step. scratch holds per-call workspace so concurrent callers
/// can share one system.
inline ImageField evolve_step(const ImageField& state, const PseudoParabolicSystem& system,
                              std::vector<double>& scratch) {
  detail::require(state.width() == system.width() && state.height() == system.height(),
                  "evolve_step: field " + std::to_string(state.width()) + "x" +
                      std::to_string(state.height()) + " does not match system " +
                      std::to_string(system.width()) + "x" + std::to_string(system.height()));
  // Increment form: A d = dt L u^n, u^{n+1} = u^n + d.
  ImageField next(state.width(), state.height());
  detail::apply_shifted_laplacian(state.values(), state.width(), state.height(), 0.0,
                                  -system.config().dt, next.values());
  system.solve_in_place(next.values(), scratch);
  const auto u = state.values();
  auto out = next.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += u[i];
  return next;
}

inline ImageField evolve_step(const ImageField& state, const PseudoParabolicSystem& system) {
  std::vector<double> scratch;
  return evolve_step(state, system, scratch);
}

/// Frames u_0 .. u_K against a shared system (u_0 is the input).
inline std::vector<ImageField> evolve_sequence(const ImageField& image,
                                               const PseudoParabolicSystem& system) {
  std::vector<ImageField> frames;
  frames.reserve(system.config().steps + 1);
  frames.push_back(image);
  std::vector<double> scratch;
  for (std::size_t k = 0; k < system.config().steps; ++k)
    frames.push_back(evolve_step(frames.back(), system, scratch));
  return frames;
}

inline std::vector<ImageField> evolve_sequence(const ImageField& image, const SolverConfig& config) {
  const auto system = assemble_system(image.width(), image.height(), config);
  return evolve_sequence(image, system);
}

}  // namespace pptex
