#pragma once

#include <string>

#include "illusory/filters.hpp"

namespace illusory {

/// Stage sizes of the illusion-revealing filter. Defaults are the reference
/// constants; only gaussian_ksize ("blur amount") is meant to be tuned.
struct FilterConfig {
  int gaussian_ksize = 61;
  int box_kw = 20;
  int box_kh = 20;
  int median_ksize = 5;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

inline void validate_config(const FilterConfig& cfg) {
  auto fail = [](const char* field, int value, const char* rule) {
    throw Error(ErrorCode::BadKernelSize,
                std::string(field) + "=" + std::to_string(value) + " " + rule);
  };
  if (cfg.gaussian_ksize < 1 || cfg.gaussian_ksize % 2 == 0) {
    fail("gaussian_ksize", cfg.gaussian_ksize, "must be odd and >= 1");
  }
  if (cfg.box_kw < 1) fail("box_kw", cfg.box_kw, "must be >= 1");
  if (cfg.box_kh < 1) fail("box_kh", cfg.box_kh, "must be >= 1");
  if (cfg.median_ksize < 3 || cfg.median_ksize % 2 == 0) {
    fail("median_ksize", cfg.median_ksize, "must be odd and >= 3");
  }
}

/// Gaussian, box and median blurs on the colour image; the low-pass part of reveal().
inline ImageBuffer low_pass(const ImageBuffer& img, const FilterConfig& cfg = {}) {
  validate_config(cfg);
  ImageBuffer out = gaussian_blur(img, cfg.gaussian_ksize);
  out = box_blur(out, cfg.box_kw, cfg.box_kh);
  return median_blur(out, cfg.median_ksize);
}

/// gaussian -> box -> median -> grayscale -> sharpen. Output is single-channel.
inline ImageBuffer reveal(const ImageBuffer& img, const FilterConfig& cfg = {}) {
  require_channels(img, 3, "reveal");
  return sharpen(to_grayscale(low_pass(img, cfg)));
}

}  // namespace illusory
