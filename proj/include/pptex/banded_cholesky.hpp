#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pptex/error.hpp"

namespace pptex {

// Cholesky factor L (A = L L^T) of a symmetric positive-definite band matrix
// with half-bandwidth b. Row i of L is stored contiguously as the b+1 entries
// for columns i-b .. i, so every inner product in both the factorization and
// the solves runs over contiguous memory.
class BandedCholesky {
 public:
  BandedCholesky() = default;

  // entry(i, j) must return A(i, j) for i >= j >= i - b; entries outside the
  // band are taken as zero.
  template <class EntryFn>
  BandedCholesky(std::size_t n, std::size_t bandwidth, EntryFn&& entry) : n_(n), b_(bandwidth) {
    const std::size_t stride = b_ + 1;
    if (n_ != 0 && stride > std::numeric_limits<std::size_t>::max() / n_)
      throw ConfigError("BandedCholesky: band storage overflows");
    band_.assign(n_ * stride, 0.0);

    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t first = i > b_ ? i - b_ : 0;
      double* row_i = band_.data() + i * stride;
      for (std::size_t j = first; j <= i; ++j) {
        const double* row_j = band_.data() + j * stride;
        // sum_{k = max(first_i, first_j)}^{j-1} L(i,k) L(j,k)
        const std::size_t first_j = j > b_ ? j - b_ : 0;
        const std::size_t k0 = first > first_j ? first : first_j;
        double s = entry(i, j);
        const double* pi = row_i + (k0 + b_ - i);
        const double* pj = row_j + (k0 + b_ - j);
        for (std::size_t k = k0; k < j; ++k) s -= *pi++ * *pj++;
        if (j == i) {
          if (!(s > 0.0) || !std::isfinite(s))
            throw NumericError("BandedCholesky: non-positive pivot " + std::to_string(s) +
                               " at row " + std::to_string(i));
          row_i[b_] = std::sqrt(s);
        } else {
          row_i[j + b_ - i] = s / row_j[b_];
        }
      }
    }
  }

  std::size_t order() const noexcept { return n_; }
  std::size_t bandwidth() const noexcept { return b_; }

  // L(i, j) for j in [i-b, i]; zero elsewhere.
  double factor_entry(std::size_t i, std::size_t j) const noexcept {
    if (j > i || i - j > b_) return 0.0;
    return band_[i * (b_ + 1) + (j + b_ - i)];
  }

  /// Overwrites rhs with A^{-1} rhs.
  void solve_in_place(std::span<double> x) const {
    detail::require(x.size() == n_, "BandedCholesky::solve_in_place: size mismatch");
    const std::size_t stride = b_ + 1;
    // L y = r
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t first = i > b_ ? i - b_ : 0;
      const double* row = band_.data() + i * stride;
      double s = x[i];
      const double* p = row + (first + b_ - i);
      for (std::size_t k = first; k < i; ++k) s -= *p++ * x[k];
      x[i] = s / row[b_];
    }
    // L^T x = y, column sweep using the rows of L
    for (std::size_t i = n_; i-- > 0;) {
      const std::size_t first = i > b_ ? i - b_ : 0;
      const double* row = band_.data() + i * stride;
      const double xi = x[i] / row[b_];
      x[i] = xi;
      const double* p = row + (first + b_ - i);
      for (std::size_t k = first; k < i; ++k) x[k] -= *p++ * xi;
    }
  }

 private:
  std::size_t n_ = 0;
  std::size_t b_ = 0;
  std::vector<double> band_;
};

}  // namespace pptex
