#include <gtest/gtest.h>

#include <algorithm>

#include "advxfer/error.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/imaging.hpp"
#include "advxfer/random.hpp"
#include "support/fixtures.hpp"

using namespace advxfer;

namespace {

Patch constant_patch(int w, int h, double v) {
  return Patch(w, h, std::vector<double>(static_cast<std::size_t>(w) * h * 3, v));
}

Patch mirror(const Patch& p, bool horizontal) {
  Patch out = p;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const int sx = horizontal ? p.width() - 1 - x : x;
        const int sy = horizontal ? y : p.height() - 1 - y;
        out.at(x, y, c) = p.at(sx, sy, c);
      }
    }
  }
  return out;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

}  // namespace

TEST(Patch, RejectsBadDimensions) {
  EXPECT_EQ(kind_of([] { create_patch(0, 4, 1); }), ErrorKind::kInvalidDimension);
  EXPECT_EQ(kind_of([] { create_patch(4, -1, 1); }), ErrorKind::kInvalidDimension);
  EXPECT_EQ(kind_of([] { Patch(2, 2, std::vector<double>(11)); }), ErrorKind::kInvalidDimension);
}

TEST(Patch, CreateIsSeededAndInRange) {
  const Patch a = create_patch(2, 2, 7);
  const Patch b = create_patch(2, 2, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, create_patch(2, 2, 8));
  const Patch big = create_patch(32, 32, 3);
  EXPECT_EQ(big.size(), 32u * 32u * 3u);
  for (double v : big.values()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 255.0);
  }
}

TEST(Patch, CreateIsPinnedAcrossPlatforms) {
  // First channel of create_patch(1, 1, 0): 255 * uniform01 of the first
  // mt19937_64 draw for the seed.
  const Patch p = create_patch(1, 1, 0);
  std::mt19937_64 engine(0);
  const double expected = 255.0 * static_cast<double>(engine() >> 11) * 0x1.0p-53;
  EXPECT_EQ(p.values()[0], expected);
}

TEST(ClipPixels, ClampsAndIsIdempotent) {
  Patch p(1, 1, {-3.2, 260.1, 17.5});
  const Patch c = clip_pixels(p);
  EXPECT_EQ(c.values()[0], 0.0);
  EXPECT_EQ(c.values()[1], 255.0);
  EXPECT_EQ(c.values()[2], 17.5);
  EXPECT_EQ(clip_pixels(c), c);
  const Patch valid = create_patch(3, 3, 5);
  EXPECT_EQ(clip_pixels(valid), valid);
}

TEST(ClipPixels, IdempotentOnRandomPatches) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(12);
    for (double& x : v) x = rng.uniform(-300.0, 600.0);
    const Patch once = clip_pixels(Patch(2, 2, v));
    EXPECT_EQ(clip_pixels(once), once);
  }
}

TEST(TotalVariation, HandValues) {
  EXPECT_EQ(total_variation(constant_patch(5, 3, 99.0)), 0.0);
  // Two pixels differing by 10 in every channel: 3 * 10 / (2 * 1).
  const Patch p(2, 1, {0, 0, 0, 10, 10, 10});
  EXPECT_DOUBLE_EQ(total_variation(p), 15.0);
  // 2x2 checkerboard of 0/1 in red only: 4 neighbour pairs of 1, / 4.
  const Patch q(2, 2, {0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(total_variation(q), 1.0);
}

TEST(TotalVariation, NonNegativeAndMirrorInvariant) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Patch p = create_patch(1 + static_cast<int>(s % 7), 1 + static_cast<int>(s % 5), s);
    const double tv = total_variation(p);
    EXPECT_GE(tv, 0.0);
    EXPECT_NEAR(total_variation(mirror(p, true)), tv, 1e-9);
    EXPECT_NEAR(total_variation(mirror(p, false)), tv, 1e-9);
  }
}

TEST(Resample, NativeSizeIsIdentity) {
  const Patch p = create_patch(5, 4, 2);
  const auto out = resample_bilinear(p, 5, 4);
  ASSERT_EQ(out.size(), p.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], p.values()[i], 1e-12);
}

TEST(Resample, ConstantStaysConstant) {
  const auto out = resample_bilinear(constant_patch(3, 3, 42.0), 17, 9);
  for (double v : out) EXPECT_NEAR(v, 42.0, 1e-12);
}

TEST(Resample, UpsampleInterpolatesBetweenPixels) {
  // Two pixels 0 and 100 horizontally, doubled: centre-aligned samples at
  // source x = -0.25, 0.25, 0.75, 1.25 -> clamped 0, 25, 75, 100.
  const Patch p(2, 1, {0, 0, 0, 100, 100, 100});
  const auto out = resample_bilinear(p, 4, 1);
  EXPECT_NEAR(out[0], 0.0, 1e-12);
  EXPECT_NEAR(out[3], 25.0, 1e-12);
  EXPECT_NEAR(out[6], 75.0, 1e-12);
  EXPECT_NEAR(out[9], 100.0, 1e-12);
}

TEST(Composite, ZeroAreaLeavesFrameUnchanged) {
  const Frame f = Frame::blank(8, 8, 10, 20, 30);
  const Patch p = create_patch(2, 2, 1);
  EXPECT_EQ(composite(f, p, {3, 3, 0, 0}), f);
  EXPECT_EQ(composite(f, p, {3, 3, 4, 0}), f);
}

TEST(Composite, WritesRoundedPixelsInsidePlacementOnly) {
  const Frame f = Frame::blank(6, 5, 1, 2, 3);
  const Patch p(2, 1, {10.4, 10.5, 254.6, 0, 0, 0});
  const Frame out = composite(f, p, {1, 2, 2, 1});
  EXPECT_EQ(out.at(1, 2, 0), 10);
  EXPECT_EQ(out.at(1, 2, 1), 11);
  EXPECT_EQ(out.at(1, 2, 2), 255);
  EXPECT_EQ(out.at(2, 2, 0), 0);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      if (y == 2 && (x == 1 || x == 2)) continue;
      EXPECT_EQ(out.at(x, y, 0), 1);
    }
  }
}

TEST(Composite, PlacementPastEdgesIsClipped) {
  const Frame f = Frame::blank(4, 4);
  const Patch p = constant_patch(4, 4, 200.0);
  const Frame out = composite(f, p, {-2, 2, 4, 4});
  int written = 0;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) written += out.at(x, y, 0) == 200 ? 1 : 0;
  }
  EXPECT_EQ(written, 4);  // x in [0, 2), y in [2, 4)
  EXPECT_EQ(composite(f, p, {10, 10, 3, 3}), f);
}

TEST(Composite, ChannelMapClamps) {
  const Frame f = Frame::blank(2, 2);
  const Frame out = composite(f, constant_patch(1, 1, 250.0), {0, 0, 1, 1}, {1.1, 0.0});
  EXPECT_EQ(out.at(0, 0, 0), 255);
  const Frame low = composite(f, constant_patch(1, 1, 5.0), {0, 0, 1, 1}, {1.0, -12.75});
  EXPECT_EQ(low.at(0, 0, 0), 0);
}

TEST(Quantize, RoundsHalfUpAndClamps) {
  const Patch p(1, 1, {2.5, 254.5, 0.49});
  EXPECT_EQ(quantize(p), (std::vector<std::uint8_t>{3, 255, 0}));
}

TEST(ImageIo, PngRoundTrip) {
  fixtures::TempDir dir("png");
  Frame f = Frame::blank(7, 3);
  Rng rng(4);
  for (auto& px : f.pixels) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  write_png(dir / "f.png", f);
  const Frame back = read_image(dir / "f.png");
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.pixels, f.pixels);
  EXPECT_EQ(decode_png(encode_png(f)).pixels, f.pixels);
}

TEST(ImageIo, PatchPngStoresQuantizedValues) {
  fixtures::TempDir dir("patchpng");
  const Patch p = create_patch(3, 2, 9);
  write_patch_png(dir / "p.png", p);
  const Patch back = read_patch_png(dir / "p.png");
  const auto q = quantize(p);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(back.values()[i], q[i]);
}

TEST(ImageIo, Errors) {
  fixtures::TempDir dir("imgerr");
  EXPECT_EQ(kind_of([&] { read_image(dir / "absent.png"); }), ErrorKind::kMissingInput);
  const std::string junk = "not an image at all";
  write_file_bytes(dir / "junk.png",
                   std::span(reinterpret_cast<const std::uint8_t*>(junk.data()), junk.size()));
  EXPECT_EQ(kind_of([&] { read_image(dir / "junk.png"); }), ErrorKind::kIo);
  const auto encoded = encode_png(Frame::blank(4, 4));
  const std::vector<std::uint8_t> truncated(encoded.begin(), encoded.begin() + 20);
  EXPECT_EQ(kind_of([&] { decode_png(truncated); }), ErrorKind::kIo);
}
