#include "advxfer/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advxfer/error.hpp"
#include "advxfer/random.hpp"

namespace advxfer {
namespace {

void check_dimensions(int width, int height) {
  if (width < 1 || height < 1) {
    fail(ErrorKind::kInvalidDimension,
         "patch dimensions must be positive, got " + std::to_string(width) + "x" +
             std::to_string(height));
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
}

}  // namespace

Patch::Patch(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dimensions(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * height * 3) {
    fail(ErrorKind::kInvalidDimension,
         "patch value count " + std::to_string(values_.size()) + " does not match " +
             std::to_string(width) + "x" + std::to_string(height) + "x3");
  }
}

Frame Frame::blank(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (width < 1 || height < 1) {
    fail(ErrorKind::kInvalidDimension, "frame dimensions must be positive");
  }
  Frame frame;
  frame.width = width;
  frame.height = height;
  frame.pixels.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < frame.pixels.size(); i += 3) {
    frame.pixels[i] = r;
    frame.pixels[i + 1] = g;
    frame.pixels[i + 2] = b;
  }
  return frame;
}

Patch create_patch(int width, int height, std::uint64_t seed) {
  check_dimensions(width, height);
  Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(width) * height * 3);
  for (double& v : values) v = 255.0 * rng.uniform01();
  return Patch(width, height, std::move(values));
}

Patch clip_pixels(Patch patch) {
  for (double& v : patch.values()) v = std::clamp(v, 0.0, 255.0);
  return patch;
}

double total_variation(const Patch& patch) {
  const int w = patch.width();
  const int h = patch.height();
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = patch.at(x, y, c);
        if (x + 1 < w) sum += std::abs(patch.at(x + 1, y, c) - v);
        if (y + 1 < h) sum += std::abs(patch.at(x, y + 1, c) - v);
      }
    }
  }
  return sum / (static_cast<double>(w) * h);
}

std::vector<double> resample_bilinear(const Patch& patch, int out_w, int out_h) {
  std::vector<double> out(static_cast<std::size_t>(std::max(out_w, 0)) * std::max(out_h, 0) * 3);
  if (out.empty()) return out;
  const int pw = patch.width();
  const int ph = patch.height();
  const double sx = static_cast<double>(pw) / out_w;
  const double sy = static_cast<double>(ph) / out_h;

  // Horizontal taps are shared by every output row.
  std::vector<int> x0(out_w), x1(out_w);
  std::vector<double> tx(out_w);
  for (int x = 0; x < out_w; ++x) {
    const double src = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(pw - 1));
    x0[x] = static_cast<int>(std::floor(src));
    x1[x] = std::min(x0[x] + 1, pw - 1);
    tx[x] = src - x0[x];
  }
  for (int y = 0; y < out_h; ++y) {
    const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(ph - 1));
    const int y0 = static_cast<int>(std::floor(src_y));
    const int y1 = std::min(y0 + 1, ph - 1);
    const double ty = src_y - y0;
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double top = patch.at(x0[x], y0, c) * (1.0 - tx[x]) + patch.at(x1[x], y0, c) * tx[x];
        const double bottom =
            patch.at(x0[x], y1, c) * (1.0 - tx[x]) + patch.at(x1[x], y1, c) * tx[x];
        out[(static_cast<std::size_t>(y) * out_w + x) * 3 + c] = top * (1.0 - ty) + bottom * ty;
      }
    }
  }
  return out;
}

Frame composite(const Frame& frame, const Patch& patch, const Placement& placement,
                ChannelMap map) {
  Frame out = frame;
  if (placement.w <= 0 || placement.h <= 0) return out;

  const int x_begin = std::max(placement.x, 0);
  const int y_begin = std::max(placement.y, 0);
  const int x_end = std::min(placement.x + placement.w, frame.width);
  const int y_end = std::min(placement.y + placement.h, frame.height);
  if (x_begin >= x_end || y_begin >= y_end) return out;

  const std::vector<double> scaled = resample_bilinear(patch, placement.w, placement.h);
  for (int y = y_begin; y < y_end; ++y) {
    const int py = y - placement.y;
    for (int x = x_begin; x < x_end; ++x) {
      const int px = x - placement.x;
      const double* src = &scaled[(static_cast<std::size_t>(py) * placement.w + px) * 3];
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = to_byte(map.gain * src[c] + map.offset);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> quantize(const Patch& patch) {
  std::vector<std::uint8_t> bytes(patch.size());
  const auto values = patch.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(values[i]);
  return bytes;
}

}  // namespace advxfer
