#pragma once

// Procedural illusion generator. A smooth class glyph (the concept) modulates
// the luminance of a high-frequency value-noise texture (the carrier), so the
// concept is recoverable by low-pass filtering but hard to see unfiltered.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "illusory/dataset.hpp"
#include "illusory/filters.hpp"
#include "illusory/image_io.hpp"
#include "illusory/parallel.hpp"
#include "illusory/pipeline.hpp"

namespace illusory::synth {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of sample `index` in a set generated from `seed`.
constexpr std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index));
}

inline constexpr int kMaxClasses = 10;
inline constexpr int kTemplateSize = 16;

inline const std::array<std::string, kMaxClasses>& glyph_names() {
  static const std::array<std::string, kMaxClasses> names = {
      "disk", "hbar", "vbar", "plus", "diagonal", "top half", "left half", "ring", "triangle",
      "two dots"};
  return names;
}

/// Oracle threshold below which the best correlation is read as "No illusion".
/// Produced by calibrate_threshold() over seeds 0..99 at the default spec: pure
/// carriers peak at 0.29 (after reveal()) while alpha = 1 samples never score
/// below 0.81 on either path, so 0.30 rejects every carrier with zero false
/// "No illusion" answers on pure concepts.
inline constexpr double kDefaultThreshold = 0.30;

/// Alpha band in which reveal() lifts oracle accuracy by well over 20 points:
/// the concept is a few grey levels under a carrier with standard deviation 56.
inline constexpr double kBenefitAlphaLow = 0.015;
inline constexpr double kBenefitAlphaHigh = 0.025;
inline constexpr double kDefaultAlpha = 0.02;

struct SynthSpec {
  int class_count = kMaxClasses;
  int image_size = 128;
  double alpha = kDefaultAlpha;
  double carrier_scale = 12.0;
  std::uint64_t seed = 0;
  double no_illusion_fraction = 0.0;
};

inline void validate_spec(const SynthSpec& s) {
  if (s.class_count < 2 || s.class_count > kMaxClasses) {
    throw Error(ErrorCode::BadClassId, "class_count must be in [2, 10]");
  }
  if (s.image_size < kTemplateSize) {
    throw Error(ErrorCode::ImageTooSmall, "image_size must be >= 16");
  }
  if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) {
    throw Error(ErrorCode::FormatError, "alpha must be in [0, 1]");
  }
  if (!(s.carrier_scale > 0.0)) throw Error(ErrorCode::FormatError, "carrier_scale must be > 0");
  if (!(s.no_illusion_fraction >= 0.0 && s.no_illusion_fraction <= 1.0)) {
    throw Error(ErrorCode::FormatError, "no_illusion_fraction must be in [0, 1]");
  }
}

inline LabelSet synth_labelset(int class_count) {
  return LabelSet("SyntheticGlyphs",
                  std::vector<std::string>(glyph_names().begin(),
                                           glyph_names().begin() + class_count),
                  true);
}

namespace detail {

// Uniform [0, 1) from a hashed lattice coordinate.
inline double lattice_value(std::uint64_t seed, std::uint64_t salt, std::int64_t ix,
                            std::int64_t iy) noexcept {
  const std::uint64_t h = mix64(seed ^ mix64(salt ^ mix64(static_cast<std::uint64_t>(ix) ^
                                                          mix64(static_cast<std::uint64_t>(iy)))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Glyph membership at normalized position (u, v) in [0,1]^2, glyph centre offset by (du, dv).
inline bool glyph_inside(int class_id, double u, double v, double du, double dv) noexcept {
  const double x = u - 0.5 - du, y = v - 0.5 - dv;
  const double r = std::hypot(x, y);
  switch (class_id) {
    case 0: return r < 0.3;
    case 1: return std::abs(y) < 0.14 && std::abs(x) < 0.4;
    case 2: return std::abs(x) < 0.14 && std::abs(y) < 0.4;
    case 3: return (std::abs(y) < 0.11 && std::abs(x) < 0.4) ||
                   (std::abs(x) < 0.11 && std::abs(y) < 0.4);
    case 4: return std::abs(x - y) < 0.2 && std::abs(x + y) < 0.8;
    case 5: return y < 0.0 && y > -0.42 && std::abs(x) < 0.42;
    case 6: return x < 0.0 && x > -0.42 && std::abs(y) < 0.42;
    case 7: return r > 0.24 && r < 0.42;
    case 8: return y < 0.35 && y > -0.4 && std::abs(x) < (y + 0.4) * 0.55;
    case 9: return std::hypot(x + 0.22, y + 0.22) < 0.17 || std::hypot(x - 0.22, y - 0.22) < 0.17;
    default: return false;
  }
}

/// Anti-aliased glyph coverage (4x4 supersampling), mapped onto [32, 224].
inline ImageBuffer render_glyph(int class_id, int size, double du, double dv) {
  constexpr int ss = 4;
  ImageBuffer out(size, size, 1);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double u = (x + (sx + 0.5) / ss) / size;
          const double v = (y + (sy + 0.5) / ss) / size;
          hits += glyph_inside(class_id, u, v, du, dv) ? 1 : 0;
        }
      }
      out.at(x, y) = saturate_u8(32.0 + 192.0 * hits / (ss * ss));
    }
  }
  return out;
}

/// Subtracts a Gaussian-smoothed copy (standard deviation `sigma`, Reflect101)
/// from each channel of an interleaved 3-channel size x size field.
inline std::vector<double> remove_low_band(const std::vector<double>& field, int size,
                                           double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += taps[i + radius];
  }
  for (double& t : taps) t /= total;

  auto at = [size](int x, int y, int c) {
    return (static_cast<std::size_t>(y) * size + x) * 3 + c;
  };
  std::vector<double> rows(field.size()), out(field.size());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          s += taps[t + radius] * field[at(border_index(x + t, size, BorderMode::Reflect101), y, c)];
        }
        rows[at(x, y, c)] = s;
      }
    }
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          s += taps[t + radius] * rows[at(x, border_index(y + t, size, BorderMode::Reflect101), c)];
        }
        out[at(x, y, c)] = field[at(x, y, c)] - s;
      }
    }
  }
  return out;
}

inline void check_class(int class_id) {
  if (class_id < 0 || class_id >= kMaxClasses) {
    throw Error(ErrorCode::BadClassId, "class id " + std::to_string(class_id) + " out of range");
  }
}

}  // namespace detail

/// One template per class at 16x16, independent of any seed.
struct TemplateBank {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> templates;  // zero-mean, unit-variance, 16x16

  std::size_t size() const noexcept { return labels.size(); }
};

/// Box-averages a grayscale image onto an n x n grid.
inline std::vector<double> downsample_box(const ImageBuffer& gray, int n) {
  require_channels(gray, 1, "downsample_box");
  std::vector<double> out(static_cast<std::size_t>(n) * n);
  const int w = gray.width(), h = gray.height();
  for (int gy = 0; gy < n; ++gy) {
    const int y0 = gy * h / n;
    const int y1 = std::max((gy + 1) * h / n, y0 + 1);
    for (int gx = 0; gx < n; ++gx) {
      const int x0 = gx * w / n;
      const int x1 = std::max((gx + 1) * w / n, x0 + 1);
      double sum = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) sum += gray.at(std::min(x, w - 1), std::min(y, h - 1));
      }
      out[gy * n + gx] = sum / ((x1 - x0) * (y1 - y0));
    }
  }
  return out;
}

/// Zero-mean, unit-variance copy. Returns false when the input has no variance.
inline bool standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var < 1e-12) return false;
  const double inv = 1.0 / std::sqrt(var);
  for (double& x : v) x = (x - mean) * inv;
  return true;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

inline ImageBuffer render_template(int class_id) {
  detail::check_class(class_id);
  return detail::render_glyph(class_id, kTemplateSize, 0.0, 0.0);
}

inline TemplateBank make_template_bank(int class_count) {
  if (class_count < 1 || class_count > kMaxClasses) {
    throw Error(ErrorCode::BadClassId, "class_count must be in [1, 10]");
  }
  TemplateBank bank;
  for (int c = 0; c < class_count; ++c) {
    auto t = downsample_box(render_template(c), kTemplateSize);
    standardize(t);
    bank.labels.push_back(glyph_names()[c]);
    bank.templates.push_back(std::move(t));
  }
  return bank;
}

/// Smooth class silhouette. The seed jitters the glyph position by up to 3% of the size.
inline ImageBuffer render_concept(int class_id, int size, std::uint64_t seed) {
  detail::check_class(class_id);
  if (size < 1) throw Error(ErrorCode::ImageTooSmall, "concept size must be >= 1");
  const double du = (detail::lattice_value(seed, 0xC0FFEE, class_id, 0) - 0.5) * 0.06;
  const double dv = (detail::lattice_value(seed, 0xC0FFEE, class_id, 1) - 0.5) * 0.06;
  const ImageBuffer glyph = detail::render_glyph(class_id, size, du, dv);
  return gaussian_blur(glyph, (size / 8) | 1);
}

/// Value-noise octaves at lattice spacings scale, scale/2 and scale/4 (floored
/// at one pixel, weights 1, 0.3, 0.1), independent per channel, high-passed by
/// subtracting a Gaussian (sigma = size/16) three times, then contrast-normalized
/// to mean 128 and standard deviation 56.
inline ImageBuffer render_carrier(int size, double carrier_scale, std::uint64_t seed) {
  if (!(carrier_scale > 0.0)) throw Error(ErrorCode::FormatError, "carrier_scale must be > 0");
  if (size < 1) throw Error(ErrorCode::ImageTooSmall, "carrier size must be >= 1");
  constexpr std::array<double, 3> amplitude = {1.0, 0.3, 0.1};
  const std::size_t n = static_cast<std::size_t>(size) * size * 3;
  std::vector<double> field(n, 0.0);

  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (int c = 0; c < 3; ++c) {
    for (int o = 0; o < 3; ++o) {
      const double spacing = std::max(1.0, carrier_scale / static_cast<double>(1 << o));
      const std::uint64_t salt = static_cast<std::uint64_t>(c * 16 + o + 1);
      for (int y = 0; y < size; ++y) {
        const double fy = y / spacing;
        const auto iy = static_cast<std::int64_t>(std::floor(fy));
        const double ty = smooth(fy - iy);
        for (int x = 0; x < size; ++x) {
          const double fx = x / spacing;
          const auto ix = static_cast<std::int64_t>(std::floor(fx));
          const double tx = smooth(fx - ix);
          const double v00 = detail::lattice_value(seed, salt, ix, iy);
          const double v10 = detail::lattice_value(seed, salt, ix + 1, iy);
          const double v01 = detail::lattice_value(seed, salt, ix, iy + 1);
          const double v11 = detail::lattice_value(seed, salt, ix + 1, iy + 1);
          const double top = v00 + (v10 - v00) * tx;
          const double bottom = v01 + (v11 - v01) * tx;
          field[(static_cast<std::size_t>(y) * size + x) * 3 + c] +=
              amplitude[o] * (top + (bottom - top) * ty);
        }
      }
    }
  }

  // Three high-pass passes leave almost nothing below the 61-tap Gaussian's cutoff.
  const double low_band_sigma = std::max(1.0, size / 16.0);
  for (int pass = 0; pass < 3; ++pass) field = detail::remove_low_band(field, size, low_band_sigma);

  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : field) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  const double gain = sd > 0.0 ? 56.0 / sd : 0.0;

  ImageBuffer out(size, size, 3);
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] = saturate_u8(128.0 + (field[i] - mean) * gain);
  return out;
}

/// Per channel, out = (1 - alpha) * carrier + alpha * concept: the luminance
/// moves toward the concept by alpha and alpha = 0 returns the carrier.
inline ImageBuffer compose_illusion(const ImageBuffer& concept_img, const ImageBuffer& carrier,
                                    double alpha) {
  require_channels(concept_img, 1, "compose_illusion concept");
  require_channels(carrier, 3, "compose_illusion carrier");
  if (concept_img.width() != carrier.width() || concept_img.height() != carrier.height()) {
    throw Error(ErrorCode::SizeMismatch, "concept and carrier sizes differ");
  }
  if (alpha == 0.0) return carrier;
  ImageBuffer out(carrier.width(), carrier.height(), 3);
  for (int y = 0; y < carrier.height(); ++y) {
    for (int x = 0; x < carrier.width(); ++x) {
      const double target = concept_img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = saturate_u8((1.0 - alpha) * carrier.at(x, y, c) + alpha * target);
      }
    }
  }
  return out;
}

struct OracleAnswer {
  std::string label;
  double score = 0.0;
};

/// Nearest template by normalized cross-correlation at 16x16; "No illusion"
/// when the best score is below `threshold` or the image has no variance.
inline OracleAnswer oracle_classify_scored(const ImageBuffer& img, const TemplateBank& bank,
                                          double threshold) {
  if (bank.size() == 0) throw Error(ErrorCode::EmptyInput, "empty template bank");
  const ImageBuffer gray = img.channels() == 3 ? to_grayscale(img) : img;
  auto cells = downsample_box(gray, kTemplateSize);
  if (!standardize(cells)) return {std::string(kNoIllusion), 0.0};
  std::size_t best = 0;
  double best_score = correlation(cells, bank.templates[0]);
  for (std::size_t i = 1; i < bank.size(); ++i) {
    const double s = correlation(cells, bank.templates[i]);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  if (best_score < threshold) return {std::string(kNoIllusion), best_score};
  return {bank.labels[best], best_score};
}

inline std::string oracle_classify(const ImageBuffer& img, const TemplateBank& bank,
                                   double threshold = kDefaultThreshold) {
  return oracle_classify_scored(img, bank, threshold).label;
}

struct SampleSpec {
  std::string id;
  int class_id = -1;  // -1: pure carrier, labelled "No illusion"
  std::uint64_t seed = 0;
};

/// Class assignment: the first n - round(n * fraction) samples cycle through
/// the classes, the rest are pure carrier.
inline std::vector<SampleSpec> plan_samples(const SynthSpec& spec, int n) {
  validate_spec(spec);
  if (n < spec.class_count) {
    throw Error(ErrorCode::EmptyInput, "n must be >= class_count");
  }
  const int none = static_cast<int>(std::lround(n * spec.no_illusion_fraction));
  std::vector<SampleSpec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05d", i);
    out.push_back({id, i < n - none ? i % spec.class_count : -1,
                   sample_seed(spec.seed, static_cast<std::uint64_t>(i))});
  }
  return out;
}

inline ImageBuffer render_sample(const SynthSpec& spec, const SampleSpec& s) {
  const ImageBuffer carrier = render_carrier(spec.image_size, spec.carrier_scale, s.seed);
  if (s.class_id < 0) return carrier;
  return compose_illusion(render_concept(s.class_id, spec.image_size, s.seed), carrier,
                          spec.alpha);
}

inline std::string sample_label(const SampleSpec& s) {
  return s.class_id < 0 ? std::string(kNoIllusion) : glyph_names()[s.class_id];
}

/// Writes images/<id>.png plus manifest.jsonl under `out_dir`.
inline Manifest generate_set(const SynthSpec& spec, int n, const std::filesystem::path& out_dir,
                             int jobs = 1) {
  const auto plan = plan_samples(spec, n);
  std::filesystem::create_directories(out_dir / "images");
  Manifest m;
  m.kind = TaskKind::Classification;
  m.labels = synth_labelset(spec.class_count);
  m.records.resize(plan.size());
  parallel_for(static_cast<int>(plan.size()), jobs, [&](int i) {
    const auto& s = plan[i];
    const std::string rel = "images/" + s.id + ".png";
    write_image(out_dir / rel, render_sample(spec, s));
    m.records[i] = {s.id, rel, Variant::Illusion, TaskKind::Classification, sample_label(s),
                    Split::Test};
  });
  save_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

struct StudyResult {
  int samples = 0;
  int unfiltered_correct = 0;
  int filtered_correct = 0;

  double unfiltered_accuracy() const { return samples ? 100.0 * unfiltered_correct / samples : 0; }
  double filtered_accuracy() const { return samples ? 100.0 * filtered_correct / samples : 0; }

  friend bool operator==(const StudyResult&, const StudyResult&) = default;
};

/// Oracle accuracy on the raw composites and on their reveal()ed versions.
inline StudyResult run_study(const SynthSpec& spec, int n, const FilterConfig& cfg = {},
                             double threshold = kDefaultThreshold, int jobs = 1) {
  const auto plan = plan_samples(spec, n);
  const TemplateBank bank = make_template_bank(spec.class_count);
  std::vector<char> raw_ok(plan.size()), filtered_ok(plan.size());
  parallel_for(static_cast<int>(plan.size()), jobs, [&](int i) {
    const ImageBuffer img = render_sample(spec, plan[i]);
    const std::string truth = sample_label(plan[i]);
    raw_ok[i] = oracle_classify(img, bank, threshold) == truth;
    filtered_ok[i] = oracle_classify(reveal(img, cfg), bank, threshold) == truth;
  });
  StudyResult r;
  r.samples = static_cast<int>(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    r.unfiltered_correct += raw_ok[i];
    r.filtered_correct += filtered_ok[i];
  }
  return r;
}

struct ThresholdCalibration {
  double threshold = 0.0;
  double max_carrier_score = 0.0;   // best score of any pure carrier, raw or revealed
  double min_concept_score = 1.0;   // worst score of any alpha = 1 sample, raw or revealed
  bool concepts_all_correct = true; // argmax correct for every alpha = 1 sample
};

/// Smallest multiple of 0.05 strictly above every pure-carrier score over
/// `seeds` samples (both raw and revealed). The result is usable when it stays
/// below min_concept_score.
inline ThresholdCalibration calibrate_threshold(SynthSpec spec, int seeds,
                                                const FilterConfig& cfg = {}) {
  validate_spec(spec);
  const TemplateBank bank = make_template_bank(spec.class_count);
  ThresholdCalibration cal;
  for (int i = 0; i < seeds; ++i) {
    const std::uint64_t seed = sample_seed(spec.seed, static_cast<std::uint64_t>(i));
    const ImageBuffer carrier = render_carrier(spec.image_size, spec.carrier_scale, seed);
    for (const auto& img : {carrier, reveal(carrier, cfg)}) {
      cal.max_carrier_score =
          std::max(cal.max_carrier_score, oracle_classify_scored(img, bank, -1.0).score);
    }
    const int class_id = i % spec.class_count;
    const ImageBuffer pure = compose_illusion(render_concept(class_id, spec.image_size, seed),
                                              carrier, 1.0);
    for (const auto& img : {pure, reveal(pure, cfg)}) {
      const OracleAnswer a = oracle_classify_scored(img, bank, -1.0);
      cal.min_concept_score = std::min(cal.min_concept_score, a.score);
      cal.concepts_all_correct &= a.label == glyph_names()[class_id];
    }
  }
  cal.threshold = (std::floor(cal.max_carrier_score / 0.05 + 1e-9) + 1.0) * 0.05;
  return cal;
}

}  // namespace illusory::synth
