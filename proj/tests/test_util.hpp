#pragma once

// Shared helpers for the test suites: seeded random inputs and brute-force
// reference implementations that share no code with the library's fast paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "illusory/image.hpp"
#include "illusory/kernel.hpp"

namespace illusory::testing {

inline ImageBuffer random_image(int w, int h, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, 255);
  ImageBuffer img(w, h, channels);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(dist(rng));
  return img;
}

inline ImageBuffer constant_image(int w, int h, std::vector<std::uint8_t> pixel) {
  ImageBuffer img(w, h, static_cast<int>(pixel.size()));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = pixel[c];
    }
  }
  return img;
}

inline ImageBuffer mirror_horizontal(const ImageBuffer& img) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
      }
    }
  }
  return out;
}

// Reflect101 by explicit bouncing, one step at a time.
inline int reflect101_walk(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

inline int replicate_clamp(int i, int n) { return std::clamp(i, 0, n - 1); }

inline std::uint8_t round_clamp(double v) {
  // floor(x + 0.5) equals round-half-away for x >= 0; negative values clamp to 0 anyway.
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

/// Direct 2D correlation with a centred kernel of real coefficients, Reflect101.
inline ImageBuffer direct_correlation(const ImageBuffer& img, const std::vector<double>& k,
                                      int kh, int kw) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  // Source index for every (output coordinate, tap) pair.
  std::vector<int> sx(static_cast<std::size_t>(img.width()) * kw);
  std::vector<int> sy(static_cast<std::size_t>(img.height()) * kh);
  for (int x = 0; x < img.width(); ++x) {
    for (int q = 0; q < kw; ++q) sx[x * kw + q] = reflect101_walk(x + q - kw / 2, img.width());
  }
  for (int y = 0; y < img.height(); ++y) {
    for (int r = 0; r < kh; ++r) sy[y * kh + r] = reflect101_walk(y + r - kh / 2, img.height());
  }
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int r = 0; r < kh; ++r) {
          for (int q = 0; q < kw; ++q) {
            acc += k[r * kw + q] * img.at(sx[x * kw + q], sy[y * kh + r], c);
          }
        }
        out.at(x, y, c) = round_clamp(acc);
      }
    }
  }
  return out;
}

/// Sampled Gaussian from the closed form, normalized, computed independently.
inline std::vector<double> gaussian_taps(int ksize) {
  const double sigma = 0.3 * ((ksize - 1) / 2.0 - 1.0) + 0.8;
  std::vector<double> t(ksize);
  double sum = 0.0;
  for (int i = 0; i < ksize; ++i) {
    const double d = i - (ksize - 1) / 2.0;
    t[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += t[i];
  }
  for (double& v : t) v /= sum;
  return t;
}

/// Full 2D Gaussian kernel as an outer product of gaussian_taps.
inline std::vector<double> gaussian_outer(int ksize) {
  const auto t = gaussian_taps(ksize);
  std::vector<double> k(ksize * ksize);
  for (int r = 0; r < ksize; ++r) {
    for (int q = 0; q < ksize; ++q) k[r * ksize + q] = t[r] * t[q];
  }
  return k;
}

/// Sliding window mean: window [x - kw/2, x - kw/2 + kw - 1], Reflect101, exact rational rounding.
inline ImageBuffer window_mean(const ImageBuffer& img, int kw, int kh) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        long sum = 0;
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kw; ++dx) {
            sum += img.at(reflect101_walk(x - kw / 2 + dx, img.width()),
                          reflect101_walk(y - kh / 2 + dy, img.height()), c);
          }
        }
        const long n = static_cast<long>(kw) * kh;
        // round half up on a nonnegative rational: floor(sum/n + 1/2)
        out.at(x, y, c) = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
      }
    }
  }
  return out;
}

/// Median by fully sorting the k x k window, Replicate borders.
inline ImageBuffer sort_median(const ImageBuffer& img, int k) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  std::vector<int> win;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        win.clear();
        for (int dy = -k / 2; dy <= k / 2; ++dy) {
          for (int dx = -k / 2; dx <= k / 2; ++dx) {
            win.push_back(img.at(replicate_clamp(x + dx, img.width()),
                                 replicate_clamp(y + dy, img.height()), c));
          }
        }
        std::sort(win.begin(), win.end());
        out.at(x, y, c) = static_cast<std::uint8_t>(win[(k * k - 1) / 2]);
      }
    }
  }
  return out;
}

/// Laplacian energy evaluated pixel by pixel with an explicit 3x3 stencil.
inline double laplacian_energy(const ImageBuffer& g) {
  const int stencil[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  double total = 0.0;
  int count = 0;
  for (int y = 1; y + 1 < g.height(); ++y) {
    for (int x = 1; x + 1 < g.width(); ++x) {
      double r = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) r += stencil[dy + 1][dx + 1] * g.at(x + dx, y + dy);
      }
      total += r * r;
      ++count;
    }
  }
  return total / count;
}

/// Full (n+1) x (m+1) dynamic-programming table edit distance.
template <typename Seq>
std::size_t dp_edit_distance(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[n][m];
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len,
                                 const std::string& alphabet = "abcd") {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (char& c : s) c = alphabet[pick(rng)];
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("illusory_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace illusory::testing
