#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "illusory/error.hpp"

namespace illusory {

/// 8-bit raster, row-major, channel-interleaved. Three-channel images are R,G,B.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    check_shape(width, height, channels);
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_shape(width, height, channels);
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(ErrorCode::SizeMismatch,
                  "data length " + std::to_string(data_.size()) + " does not match " +
                      std::to_string(width) + "x" + std::to_string(height) + "x" +
                      std::to_string(channels));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  static void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::SizeMismatch, "image dimensions must be >= 1");
    }
    if (channels != 1 && channels != 3) {
      throw Error(ErrorCode::ChannelMismatch, "channels must be 1 or 3");
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Round half away from zero, then clamp to [0, 255].
inline std::uint8_t saturate_u8(double v) noexcept {
  const double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

inline void require_channels(const ImageBuffer& img, int channels, const char* op) {
  if (img.channels() != channels) {
    throw Error(ErrorCode::ChannelMismatch, std::string(op) + " expects " +
                                                std::to_string(channels) + " channel(s), got " +
                                                std::to_string(img.channels()));
  }
}

}  // namespace illusory
