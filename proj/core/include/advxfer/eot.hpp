#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "advxfer/imaging.hpp"

namespace advxfer {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Viewing-condition distribution for Expectation over Transformation.
struct EotConfig {
  int k_samples = 5;
  int jitter = 5;                      // +/- pixels, both axes
  Range brightness{0.9, 1.1};          // multiplicative gain
  Range contrast{-0.05, 0.05};         // additive offset as a fraction of 255
  std::uint64_t seed = 0;

  /// Throws kInvalidInput on k_samples < 1, jitter < 0 or inverted ranges.
  void validate() const;

  /// K = 1, no jitter, unit gain, zero offset.
  static EotConfig identity();
};

struct Transform {
  int dx = 0;
  int dy = 0;
  double brightness = 1.0;
  double contrast = 0.0;  // channel units

  friend bool operator==(const Transform&, const Transform&) = default;
};

/// K transforms, components independent and uniform on their ranges
/// (dx, dy uniform integers in [-jitter, jitter]).
std::vector<Transform> sample_transforms(const EotConfig& config);
std::vector<Transform> sample_transforms(const EotConfig& config, std::uint64_t seed);

/// Shifts the placement by (dx, dy) and composites the patch with every
/// channel mapped v -> brightness * v + contrast, clamped to [0, 255].
Frame apply_transform(const Frame& frame, const Placement& placement, const Patch& patch,
                      const Transform& t);

using FrameLoss = std::function<double(const Frame&)>;

/// Mean loss over K sampled transforms; exactly K calls to `loss`.
/// Errors thrown by `loss` are rethrown with the sample index prepended.
double expected_loss(const FrameLoss& loss, const Frame& frame, const Placement& placement,
                     const Patch& patch, const EotConfig& config);
double expected_loss(const FrameLoss& loss, const Frame& frame, const Placement& placement,
                     const Patch& patch, std::span<const Transform> transforms);

}  // namespace advxfer
