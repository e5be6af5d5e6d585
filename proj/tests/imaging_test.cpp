#include <gtest/gtest.h>

#include <cstdlib>

#include "illusory/filters.hpp"
#include "test_util.hpp"

using namespace illusory;
using namespace illusory::testing;

namespace {

int max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  EXPECT_TRUE(a.same_shape(b));
  int worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(int(a.data()[i]) - int(b.data()[i])));
  }
  return worst;
}

bool is_constant(const ImageBuffer& img, std::uint8_t v) {
  for (auto p : img.data()) {
    if (p != v) return false;
  }
  return true;
}

}  // namespace

TEST(ImageBuffer, RejectsBadShapes) {
  EXPECT_THROW(ImageBuffer(0, 4, 1), Error);
  EXPECT_THROW(ImageBuffer(4, 4, 2), Error);
  EXPECT_THROW(ImageBuffer(2, 2, 1, std::vector<std::uint8_t>(3)), Error);
  ImageBuffer ok(3, 2, 3, 7);
  EXPECT_EQ(ok.size(), 18u);
  EXPECT_EQ(ok.at(2, 1, 2), 7);
}

TEST(Saturate, RoundsHalfAwayAndClamps) {
  EXPECT_EQ(saturate_u8(2.5), 3);
  EXPECT_EQ(saturate_u8(2.4999), 2);
  EXPECT_EQ(saturate_u8(-3.0), 0);
  EXPECT_EQ(saturate_u8(300.0), 255);
  EXPECT_EQ(saturate_u8(254.5), 255);
}

TEST(BorderIndex, MatchesWalkingReflectionAndClamp) {
  for (int n : {1, 2, 3, 7, 64}) {
    for (int i = -150; i < n + 150; ++i) {
      EXPECT_EQ(border_index(i, n, BorderMode::Reflect101), reflect101_walk(i, n)) << i << " " << n;
      EXPECT_EQ(border_index(i, n, BorderMode::Replicate), replicate_clamp(i, n));
    }
  }
}

TEST(Grayscale, LumaWeights) {
  EXPECT_EQ(to_grayscale(constant_image(1, 1, {255, 255, 255})).at(0, 0), 255);
  EXPECT_EQ(to_grayscale(constant_image(1, 1, {0, 0, 0})).at(0, 0), 0);
  // 0.299*200 + 0.587*150 + 0.114*100 = 159.25
  EXPECT_EQ(to_grayscale(constant_image(1, 1, {200, 150, 100})).at(0, 0), 159);
  EXPECT_THROW(to_grayscale(ImageBuffer(2, 2, 1)), Error);
}

TEST(GaussianKernel, ClosedForm) {
  EXPECT_EQ(make_gaussian_kernel(1).coefficients, std::vector<double>{1.0});
  const auto k3 = make_gaussian_kernel(3).coefficients;
  ASSERT_EQ(k3.size(), 3u);
  EXPECT_NEAR(k3[0], 0.23899, 1e-5);
  EXPECT_NEAR(k3[1], 0.52201, 1e-5);
  EXPECT_NEAR(k3[2], 0.23899, 1e-5);
  EXPECT_DOUBLE_EQ(gaussian_sigma_for(61), 9.5);
  EXPECT_DOUBLE_EQ(gaussian_sigma_for(3), 0.8);
  for (int k : {5, 31, 61}) {
    const auto c = make_gaussian_kernel(k).coefficients;
    const auto ref = gaussian_taps(k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      EXPECT_NEAR(c[i], ref[i], 1e-12);
      EXPECT_DOUBLE_EQ(c[i], c[k - 1 - i]);
      sum += c[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_THROW(make_gaussian_kernel(4), Error);
  EXPECT_THROW(make_gaussian_kernel(0), Error);
}

TEST(GaussianBlur, FixedPointsAndIdentity) {
  const auto c = constant_image(20, 13, {17, 200, 99});
  EXPECT_EQ(gaussian_blur(c, 5), c);
  EXPECT_EQ(gaussian_blur(c, 61), c);
  const auto r = random_image(9, 11, 3, 1);
  EXPECT_EQ(gaussian_blur(r, 1), r);
}

TEST(GaussianBlur, MatchesDirect2DConvolution) {
  for (int k : {3, 5, 9}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto img = random_image(64, 64, seed % 2 ? 3 : 1, 100 + seed);
      EXPECT_LE(max_abs_diff(gaussian_blur(img, k), direct_correlation(img, gaussian_outer(k), k, k)),
                1)
          << "k=" << k;
    }
  }
}

TEST(GaussianBlur, LargeKernelOnTinyImageStaysInRange) {
  // Kernel far wider than the image exercises repeated reflection.
  const auto img = random_image(5, 3, 1, 9);
  EXPECT_LE(max_abs_diff(gaussian_blur(img, 61), direct_correlation(img, gaussian_outer(61), 61, 61)),
            1);
}

TEST(GaussianBlur, CommutesWithMirroring) {
  const auto img = random_image(40, 30, 3, 5);
  EXPECT_EQ(gaussian_blur(mirror_horizontal(img), 7), mirror_horizontal(gaussian_blur(img, 7)));
}

TEST(BoxBlur, MatchesWindowMean) {
  const auto c = constant_image(10, 10, {42});
  EXPECT_EQ(box_blur(c, 20, 20), c);
  const auto r = random_image(17, 9, 3, 3);
  EXPECT_EQ(box_blur(r, 1, 1), r);
  for (auto [kw, kh] : {std::pair{20, 20}, {3, 3}, {4, 7}, {1, 5}}) {
    const auto img = random_image(32, 32, 3, kw * 31 + kh);
    EXPECT_EQ(box_blur(img, kw, kh), window_mean(img, kw, kh)) << kw << "x" << kh;
  }
  EXPECT_THROW(box_blur(r, 0, 3), Error);
}

TEST(MedianBlur, MatchesSortOracle) {
  const auto c = constant_image(8, 8, {1, 2, 3});
  EXPECT_EQ(median_blur(c, 5), c);

  ImageBuffer impulse(9, 9, 1, 0);
  impulse.at(4, 4) = 255;
  EXPECT_TRUE(is_constant(median_blur(impulse, 5), 0));

  for (int k : {3, 5, 7}) {
    const auto img = random_image(32, 32, k == 5 ? 3 : 1, 77 + k);
    EXPECT_EQ(median_blur(img, k), sort_median(img, k));
  }
  EXPECT_THROW(median_blur(c, 1), Error);
  EXPECT_THROW(median_blur(c, 4), Error);
}

TEST(Convolve, IdentityAndSharpening) {
  const auto img = random_image(12, 12, 3, 8);
  EXPECT_EQ(convolve(img, Kernel2D(1, 1, {1.0}), BorderMode::Reflect101), img);
  EXPECT_EQ(convolve(img, Kernel2D(1, 1, {1.0}), BorderMode::Replicate), img);
  EXPECT_DOUBLE_EQ(sharpening_kernel().sum(), 1.0);

  const auto c = constant_image(7, 7, {77});
  EXPECT_EQ(convolve(c, sharpening_kernel(), BorderMode::Reflect101), c);

  ImageBuffer spot(5, 5, 1, 0);
  spot.at(2, 2) = 255;
  const auto s = convolve(spot, sharpening_kernel(), BorderMode::Reflect101);
  EXPECT_EQ(s.at(2, 2), 255);
  EXPECT_EQ(s.at(1, 2), 0);
  EXPECT_EQ(s.at(3, 2), 0);
  EXPECT_EQ(s.at(2, 1), 0);
  EXPECT_EQ(s.at(2, 3), 0);
  EXPECT_EQ(s.at(1, 1), 0);
  EXPECT_EQ(s.at(3, 3), 0);
}

TEST(Convolve, MatchesDirectCorrelationForArbitraryKernel) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coef(-0.5, 0.8);
  std::vector<double> k(5 * 3);
  for (double& v : k) v = coef(rng);
  const auto img = random_image(23, 19, 3, 12);
  // Direct oracle indexes the kernel as k[r * kw + q] with centred anchor.
  EXPECT_EQ(convolve(img, Kernel2D(5, 3, k), BorderMode::Reflect101),
            direct_correlation(img, k, 5, 3));
}

TEST(Sharpen, FixedPointsAndEquivalence) {
  EXPECT_EQ(sharpen(constant_image(6, 6, {100})), constant_image(6, 6, {100}));
  EXPECT_EQ(sharpen(constant_image(6, 6, {0})), constant_image(6, 6, {0}));
  const auto g = random_image(30, 20, 1, 21);
  EXPECT_EQ(sharpen(g), convolve(g, sharpening_kernel(), BorderMode::Reflect101));
  const std::vector<double> k = {-1, -2, -1, -2, 13, -2, -1, -2, -1};
  EXPECT_EQ(sharpen(g), direct_correlation(g, k, 3, 3));
  EXPECT_THROW(sharpen(random_image(4, 4, 3, 1)), Error);
}

TEST(HighbandEnergy, MatchesStencilOracle) {
  EXPECT_EQ(highband_energy(constant_image(8, 8, {90})), 0.0);

  ImageBuffer checker(8, 8, 1);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) checker.at(x, y) = (x + y) % 2 ? 255 : 0;
  }
  const double e = highband_energy(checker);
  EXPECT_GT(e, 0.0);
  EXPECT_DOUBLE_EQ(e, laplacian_energy(checker));
  EXPECT_DOUBLE_EQ(e, (4.0 * 255) * (4.0 * 255));

  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = random_image(31, 17, 1, s);
    EXPECT_DOUBLE_EQ(highband_energy(g), laplacian_energy(g));
  }
  EXPECT_THROW(highband_energy(ImageBuffer(2, 5, 1)), Error);
  EXPECT_THROW(highband_energy(ImageBuffer(5, 5, 3)), Error);
}

TEST(HighbandEnergy, GaussianReducesIt) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = random_image(48, 48, 1, 300 + s);
    EXPECT_LT(highband_energy(gaussian_blur(g, 61)), highband_energy(g));
  }
}
