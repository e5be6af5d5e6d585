#pragma once

// Raster filtering primitives. Everything here accumulates in double,
// rounds half away from zero and saturates to [0, 255] when it writes a sample.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "illusory/image.hpp"
#include "illusory/kernel.hpp"

namespace illusory {

inline ImageBuffer to_grayscale(const ImageBuffer& img) {
  require_channels(img, 3, "to_grayscale");
  ImageBuffer out(img.width(), img.height(), 1);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = saturate_u8(y);
  }
  return out;
}

/// Copies a grayscale image into three identical channels.
inline ImageBuffer replicate_to_rgb(const ImageBuffer& gray) {
  require_channels(gray, 1, "replicate_to_rgb");
  ImageBuffer out(gray.width(), gray.height(), 3);
  const auto src = gray.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

/// Correlation (the kernel is not flipped) with the kernel's anchor placed on each pixel.
inline ImageBuffer convolve(const ImageBuffer& img, const Kernel2D& kernel, BorderMode border) {
  if (img.empty()) throw Error(ErrorCode::SizeMismatch, "convolve on an empty image");
  const int w = img.width(), h = img.height(), ch = img.channels();
  ImageBuffer out(w, h, ch);

  std::vector<int> xs(static_cast<std::size_t>(w) * kernel.cols());
  for (int x = 0; x < w; ++x) {
    for (int c = 0; c < kernel.cols(); ++c) {
      xs[x * kernel.cols() + c] = border_index(x + c - kernel.anchor_col(), w, border);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (int r = 0; r < kernel.rows(); ++r) {
          const int sy = border_index(y + r - kernel.anchor_row(), h, border);
          for (int c = 0; c < kernel.cols(); ++c) {
            acc += kernel(r, c) * img.at(xs[x * kernel.cols() + c], sy, k);
          }
        }
        out.at(x, y, k) = saturate_u8(acc);
      }
    }
  }
  return out;
}

namespace detail {

// One 1D pass of a centered symmetric kernel along rows (horizontal) or columns.
inline ImageBuffer separable_pass(const ImageBuffer& img, const Kernel1D& k, bool horizontal,
                                  BorderMode border) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  const int n = horizontal ? w : h;
  const int taps = k.size(), c0 = k.center();
  ImageBuffer out(w, h, ch);

  std::vector<int> idx(static_cast<std::size_t>(n) * taps);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < taps; ++t) idx[i * taps + t] = border_index(i + t - c0, n, border);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = horizontal ? x : y;
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = 0; t < taps; ++t) {
          const int s = idx[i * taps + t];
          acc += k.coefficients[t] * (horizontal ? img.at(s, y, c) : img.at(x, s, c));
        }
        out.at(x, y, c) = saturate_u8(acc);
      }
    }
  }
  return out;
}

inline void check_odd(int ksize, int minimum, const char* what) {
  if (ksize < minimum || ksize % 2 == 0) {
    throw Error(ErrorCode::BadKernelSize, std::string(what) + " must be odd and >= " +
                                              std::to_string(minimum) + ", got " +
                                              std::to_string(ksize));
  }
}

}  // namespace detail

/// Separable Gaussian blur: horizontal pass, then vertical, Reflect101 borders.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, int ksize) {
  detail::check_odd(ksize, 1, "gaussian ksize");
  if (ksize == 1) return img;
  const Kernel1D k = make_gaussian_kernel(ksize);
  const ImageBuffer tmp = detail::separable_pass(img, k, true, BorderMode::Reflect101);
  return detail::separable_pass(tmp, k, false, BorderMode::Reflect101);
}

/// Mean over a kw x kh window anchored at (kw/2, kh/2); for kw = 20 the window
/// spans [x - 10, x + 9]. Sums are exact integers, so the result is exact.
inline ImageBuffer box_blur(const ImageBuffer& img, int kw, int kh) {
  if (kw < 1 || kh < 1) {
    throw Error(ErrorCode::BadKernelSize, "box extents must be >= 1, got " +
                                              std::to_string(kw) + "x" + std::to_string(kh));
  }
  const int w = img.width(), h = img.height(), ch = img.channels();
  const int ax = kw / 2, ay = kh / 2;
  const std::int64_t n = static_cast<std::int64_t>(kw) * kh;

  // Horizontal window sums.
  std::vector<std::int64_t> rows(static_cast<std::size_t>(w) * h * ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        std::int64_t s = 0;
        for (int t = 0; t < kw; ++t) {
          s += img.at(border_index(x - ax + t, w, BorderMode::Reflect101), y, c);
        }
        rows[(static_cast<std::size_t>(y) * w + x) * ch + c] = s;
      }
    }
  }

  ImageBuffer out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        std::int64_t s = 0;
        for (int t = 0; t < kh; ++t) {
          const int sy = border_index(y - ay + t, h, BorderMode::Reflect101);
          s += rows[(static_cast<std::size_t>(sy) * w + x) * ch + c];
        }
        // round(s / n) half away from zero; s >= 0.
        out.at(x, y, c) = static_cast<std::uint8_t>((2 * s + n) / (2 * n));
      }
    }
  }
  return out;
}

/// Exact k x k median per channel with replicated borders.
inline ImageBuffer median_blur(const ImageBuffer& img, int ksize) {
  detail::check_odd(ksize, 3, "median ksize");
  const int w = img.width(), h = img.height(), ch = img.channels();
  const int side = std::max(ksize, 3);  // already checked; spelled out for the optimizer
  const int r = side / 2;
  const std::size_t mid = (static_cast<std::size_t>(side) * side - 1) / 2;
  ImageBuffer out(w, h, ch);

  // A 256-bin histogram per column position would be faster for large k; the
  // pipeline only uses k = 5, where selection on 25 samples is cheap.
  std::vector<std::uint8_t> window(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        std::uint8_t* slot = window.data();
        for (int dy = -r; dy <= r; ++dy) {
          const int sy = border_index(y + dy, h, BorderMode::Replicate);
          for (int dx = -r; dx <= r; ++dx) {
            *slot++ = img.at(border_index(x + dx, w, BorderMode::Replicate), sy, c);
          }
        }
        std::nth_element(window.begin(), window.begin() + mid, window.end());
        out.at(x, y, c) = window[mid];
      }
    }
  }
  return out;
}

inline ImageBuffer sharpen(const ImageBuffer& img) {
  require_channels(img, 1, "sharpen");
  return convolve(img, sharpening_kernel(), BorderMode::Reflect101);
}

/// Mean squared 4-neighbour Laplacian response over interior pixels.
inline double highband_energy(const ImageBuffer& img) {
  require_channels(img, 1, "highband_energy");
  const int w = img.width(), h = img.height();
  if (w < 3 || h < 3) {
    throw Error(ErrorCode::ImageTooSmall, "highband_energy needs at least 3x3 pixels");
  }
  double total = 0.0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double lap = static_cast<double>(img.at(x, y - 1)) + img.at(x, y + 1) +
                         img.at(x - 1, y) + img.at(x + 1, y) - 4.0 * img.at(x, y);
      total += lap * lap;
    }
  }
  return total / (static_cast<double>(w - 2) * (h - 2));
}

}  // namespace illusory
