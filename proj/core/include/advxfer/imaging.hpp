#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace advxfer {

/// RGB pixel grid optimized by the attack. Channels are real-valued so that
/// sub-level perturbations survive between iterations; quantization to 8 bits
/// happens only when the patch is composited or exported.
class Patch {
 public:
  /// Throws kInvalidDimension unless width, height >= 1 and
  /// values.size() == width * height * 3.
  Patch(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double at(int x, int y, int c) const { return values_[index(x, y, c)]; }
  double& at(int x, int y, int c) { return values_[index(x, y, c)]; }

  friend bool operator==(const Patch&, const Patch&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_;
  int height_;
  std::vector<double> values_;
};

/// 8-bit RGB scenario frame with its position along the approach.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
  double timestamp = 0.0;            // seconds from trial start
  double distance = 0.0;             // meters to the decision point

  static Frame blank(int width, int height, std::uint8_t r = 0, std::uint8_t g = 0,
                     std::uint8_t b = 0);

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Target rectangle in frame pixels. May extend past the frame edges.
struct Placement {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Uniform noise on [0, 255] per channel from a seeded generator.
Patch create_patch(int width, int height, std::uint64_t seed);

Patch clip_pixels(Patch patch);

/// Anisotropic L1 total variation over horizontal and vertical neighbours,
/// summed over channels and divided by width * height.
double total_variation(const Patch& patch);

/// Bilinear sample of the patch resized to (out_w, out_h), pixel-centre
/// aligned. Returns out_w * out_h * 3 real values.
std::vector<double> resample_bilinear(const Patch& patch, int out_w, int out_h);

/// Per-channel affine map applied to the resampled patch before rounding.
struct ChannelMap {
  double gain = 1.0;
  double offset = 0.0;
};

/// Writes the resampled, rounded patch over the placement clipped to the frame.
Frame composite(const Frame& frame, const Patch& patch, const Placement& placement,
                ChannelMap map = {});

/// 8-bit quantization of a patch at native resolution (round-half-up, clamped).
std::vector<std::uint8_t> quantize(const Patch& patch);

}  // namespace advxfer
