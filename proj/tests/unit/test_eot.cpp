#include <gtest/gtest.h>

#include "advxfer/eot.hpp"
#include "advxfer/error.hpp"
#include "advxfer/random.hpp"

using namespace advxfer;

TEST(EotConfig, Validation) {
  EotConfig c;
  EXPECT_NO_THROW(c.validate());
  c.k_samples = 0;
  EXPECT_THROW(c.validate(), Error);
  c = EotConfig{};
  c.brightness = {1.2, 0.8};
  EXPECT_THROW(c.validate(), Error);
  c = EotConfig{};
  c.contrast = {0.1, -0.1};
  EXPECT_THROW(c.validate(), Error);
}

TEST(SampleTransforms, DeterministicAndWithinRanges) {
  EotConfig c;
  c.k_samples = 200;
  c.seed = 5;
  const auto a = sample_transforms(c);
  const auto b = sample_transforms(c);
  ASSERT_EQ(a.size(), 200u);
  bool any_shift = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].dx, b[i].dx);
    EXPECT_EQ(a[i].brightness, b[i].brightness);
    EXPECT_GE(a[i].dx, -5);
    EXPECT_LE(a[i].dx, 5);
    EXPECT_GE(a[i].dy, -5);
    EXPECT_LE(a[i].dy, 5);
    EXPECT_GE(a[i].brightness, 0.9);
    EXPECT_LE(a[i].brightness, 1.1);
    EXPECT_GE(a[i].contrast, -0.05 * 255);
    EXPECT_LE(a[i].contrast, 0.05 * 255);
    any_shift = any_shift || a[i].dx != 0;
  }
  EXPECT_TRUE(any_shift);
  EXPECT_NE(sample_transforms(c, 6)[0].brightness, a[0].brightness);
}

TEST(ApplyTransform, IdentityEqualsPlainComposite) {
  const Frame f = Frame::blank(20, 20, 30, 60, 90);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Patch p = create_patch(4, 3, s);
    const Placement pl{3, 5, 9, 7};
    EXPECT_EQ(apply_transform(f, pl, p, Transform{}), composite(f, p, pl));
  }
}

TEST(ApplyTransform, ShiftsAndClamps) {
  const Frame f = Frame::blank(10, 10);
  const Patch p(1, 1, {250, 250, 250});
  const Frame out = apply_transform(f, {2, 2, 1, 1}, p, Transform{3, -1, 1.1, 0.0});
  EXPECT_EQ(out.at(5, 1, 0), 255);
  EXPECT_EQ(out.at(2, 2, 0), 0);
}

TEST(ExpectedLoss, CollapsedRangesMatchSingleFrameLoss) {
  const Frame f = Frame::blank(16, 16, 10, 10, 10);
  const Placement pl{4, 4, 8, 8};
  const FrameLoss loss = [](const Frame& fr) {
    double s = 0;
    for (auto v : fr.pixels) s += v;
    return s / fr.pixels.size();
  };
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Patch p = create_patch(4, 4, s);
    EotConfig id = EotConfig::identity();
    id.seed = s;
    EXPECT_NEAR(expected_loss(loss, f, pl, p, id), loss(composite(f, p, pl)), 1e-9);
    id.k_samples = 7;
    EXPECT_NEAR(expected_loss(loss, f, pl, p, id), loss(composite(f, p, pl)), 1e-9);
  }
}

TEST(ExpectedLoss, ConstantLossAndCallCount) {
  const Frame f = Frame::blank(8, 8);
  int calls = 0;
  const FrameLoss loss = [&](const Frame&) {
    ++calls;
    return 0.37;
  };
  EotConfig c;
  c.k_samples = 9;
  EXPECT_DOUBLE_EQ(expected_loss(loss, f, {1, 1, 4, 4}, create_patch(2, 2, 1), c), 0.37);
  EXPECT_EQ(calls, 9);
}

TEST(ExpectedLoss, ErrorsCarryTheSampleIndex) {
  const Frame f = Frame::blank(8, 8);
  int calls = 0;
  const FrameLoss loss = [&](const Frame&) -> double {
    if (calls++ == 2) throw Error(ErrorKind::kTransport, "boom");
    return 0.0;
  };
  try {
    expected_loss(loss, f, {0, 0, 2, 2}, create_patch(2, 2, 1), EotConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
    EXPECT_NE(std::string(e.what()).find("EoT sample 2"), std::string::npos);
  }
}
