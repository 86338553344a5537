#include "advxfer/eot.hpp"

#include <string>

#include "advxfer/error.hpp"
#include "advxfer/random.hpp"

namespace advxfer {

void EotConfig::validate() const {
  if (k_samples < 1) fail(ErrorKind::kInvalidInput, "eot: k_samples must be >= 1");
  if (jitter < 0) fail(ErrorKind::kInvalidInput, "eot: jitter must be >= 0");
  if (brightness.lo > brightness.hi) {
    fail(ErrorKind::kInvalidInput, "eot: brightness range is inverted");
  }
  if (contrast.lo > contrast.hi) fail(ErrorKind::kInvalidInput, "eot: contrast range is inverted");
}

EotConfig EotConfig::identity() {
  EotConfig config;
  config.k_samples = 1;
  config.jitter = 0;
  config.brightness = {1.0, 1.0};
  config.contrast = {0.0, 0.0};
  return config;
}

std::vector<Transform> sample_transforms(const EotConfig& config) {
  return sample_transforms(config, config.seed);
}

std::vector<Transform> sample_transforms(const EotConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<Transform> out(static_cast<std::size_t>(config.k_samples));
  for (Transform& t : out) {
    t.dx = static_cast<int>(rng.uniform_int(-config.jitter, config.jitter));
    t.dy = static_cast<int>(rng.uniform_int(-config.jitter, config.jitter));
    t.brightness = rng.uniform(config.brightness.lo, config.brightness.hi);
    t.contrast = 255.0 * rng.uniform(config.contrast.lo, config.contrast.hi);
  }
  return out;
}

Frame apply_transform(const Frame& frame, const Placement& placement, const Patch& patch,
                      const Transform& t) {
  Placement shifted = placement;
  shifted.x += t.dx;
  shifted.y += t.dy;
  return composite(frame, patch, shifted, ChannelMap{t.brightness, t.contrast});
}

double expected_loss(const FrameLoss& loss, const Frame& frame, const Placement& placement,
                     const Patch& patch, const EotConfig& config) {
  const auto transforms = sample_transforms(config);
  return expected_loss(loss, frame, placement, patch, transforms);
}

double expected_loss(const FrameLoss& loss, const Frame& frame, const Placement& placement,
                     const Patch& patch, std::span<const Transform> transforms) {
  if (transforms.empty()) fail(ErrorKind::kInvalidInput, "eot: no transforms to average");
  double sum = 0.0;
  for (std::size_t k = 0; k < transforms.size(); ++k) {
    try {
      sum += loss(apply_transform(frame, placement, patch, transforms[k]));
    } catch (const Error& e) {
      throw Error(e.kind(), "EoT sample " + std::to_string(k) + ": " + e.what());
    }
  }
  return sum / static_cast<double>(transforms.size());
}

}  // namespace advxfer
