#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "illusory/error.hpp"

namespace illusory {

enum class BorderMode {
  Reflect101,  // ...cba|abcd|cba...
  Replicate,   // ...aaa|abcd|ddd...
};

/// Maps an out-of-range coordinate onto [0, n) according to `mode`.
inline int border_index(int i, int n, BorderMode mode) noexcept {
  if (i >= 0 && i < n) return i;
  if (mode == BorderMode::Replicate) return i < 0 ? 0 : n - 1;
  if (n == 1) return 0;
  // Reflect101 with a period of 2(n-1) handles offsets wider than the image.
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

struct Kernel1D {
  std::vector<double> coefficients;

  int size() const noexcept { return static_cast<int>(coefficients.size()); }
  int center() const noexcept { return size() / 2; }
};

class Kernel2D {
 public:
  Kernel2D(int rows, int cols, std::vector<double> coefficients, int anchor_row, int anchor_col)
      : rows_(rows), cols_(cols), anchor_row_(anchor_row), anchor_col_(anchor_col),
        coefficients_(std::move(coefficients)) {
    if (rows < 1 || cols < 1 ||
        coefficients_.size() != static_cast<std::size_t>(rows) * cols) {
      throw Error(ErrorCode::BadKernelSize, "kernel extents must be >= 1 and match coefficients");
    }
    if (anchor_row < 0 || anchor_row >= rows || anchor_col < 0 || anchor_col >= cols) {
      throw Error(ErrorCode::BadKernelSize, "kernel anchor outside bounds");
    }
  }

  /// Centered kernel from a row-major coefficient list.
  Kernel2D(int rows, int cols, std::vector<double> coefficients)
      : Kernel2D(rows, cols, std::move(coefficients), rows / 2, cols / 2) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int anchor_row() const noexcept { return anchor_row_; }
  int anchor_col() const noexcept { return anchor_col_; }
  double operator()(int r, int c) const noexcept { return coefficients_[r * cols_ + c]; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }

  double sum() const { return std::accumulate(coefficients_.begin(), coefficients_.end(), 0.0); }

  static Kernel2D outer(const Kernel1D& vertical, const Kernel1D& horizontal) {
    std::vector<double> c;
    c.reserve(vertical.coefficients.size() * horizontal.coefficients.size());
    for (double v : vertical.coefficients) {
      for (double h : horizontal.coefficients) c.push_back(v * h);
    }
    return Kernel2D(vertical.size(), horizontal.size(), std::move(c));
  }

  friend bool operator==(const Kernel2D&, const Kernel2D&) = default;

 private:
  int rows_;
  int cols_;
  int anchor_row_;
  int anchor_col_;
  std::vector<double> coefficients_;
};

/// The fixed unit-gain 3x3 sharpening kernel applied after grayscale conversion.
inline const Kernel2D& sharpening_kernel() {
  static const Kernel2D kernel(3, 3,
                               {-1, -2, -1,
                                -2, 13, -2,
                                -1, -2, -1},
                               1, 1);
  return kernel;
}

inline double gaussian_sigma_for(int ksize) noexcept {
  return 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8;
}

/// Normalized sampled Gaussian whose sigma is derived from the kernel size.
inline Kernel1D make_gaussian_kernel(int ksize) {
  if (ksize < 1 || ksize % 2 == 0) {
    throw Error(ErrorCode::BadKernelSize,
                "gaussian ksize must be odd and >= 1, got " + std::to_string(ksize));
  }
  Kernel1D k;
  k.coefficients.resize(ksize);
  if (ksize == 1) {
    k.coefficients[0] = 1.0;
    return k;
  }
  const double sigma = gaussian_sigma_for(ksize);
  const double scale = -0.5 / (sigma * sigma);
  const int c = ksize / 2;
  double total = 0.0;
  for (int i = 0; i < ksize; ++i) {
    const double d = i - c;
    k.coefficients[i] = std::exp(scale * d * d);
    total += k.coefficients[i];
  }
  for (double& v : k.coefficients) v /= total;
  return k;
}

}  // namespace illusory
