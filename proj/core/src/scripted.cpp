#include "advxfer/scripted.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "advxfer/error.hpp"
#include "advxfer/random.hpp"

namespace advxfer {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorKind::kInvalidInput, "scripted: bad number for " + std::string(what) + ": '" +
                                       std::string(text) + "'");
  }
  return value;
}

int parse_channel(std::string_view name) {
  if (name == "r" || name == "red") return 0;
  if (name == "g" || name == "green") return 1;
  if (name == "b" || name == "blue") return 2;
  fail(ErrorKind::kInvalidInput, "scripted: unknown channel '" + std::string(name) + "'");
}

}  // namespace

std::string ScriptedSpec::get(std::string_view key, std::string_view fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? std::string(fallback) : it->second;
}

double ScriptedSpec::get_number(std::string_view key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : to_number(it->second, key);
}

ScriptedSpec parse_scripted_endpoint(std::string_view endpoint) {
  constexpr std::string_view kScheme = "scripted:";
  if (!endpoint.starts_with(kScheme)) {
    fail(ErrorKind::kInvalidInput, "not a scripted endpoint: '" + std::string(endpoint) + "'");
  }
  endpoint.remove_prefix(kScheme.size());
  ScriptedSpec spec;
  const std::size_t q = endpoint.find('?');
  spec.name = std::string(endpoint.substr(0, q));
  if (spec.name.empty()) fail(ErrorKind::kInvalidInput, "scripted endpoint has no name");
  if (q != std::string_view::npos) {
    for (std::string_view pair : split(endpoint.substr(q + 1), '&')) {
      if (pair.empty()) continue;
      const std::size_t eq = pair.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        fail(ErrorKind::kInvalidInput, "scripted: malformed parameter '" + std::string(pair) + "'");
      }
      spec.params.emplace(std::string(pair.substr(0, eq)), std::string(pair.substr(eq + 1)));
    }
  }
  return spec;
}

double region_mean(const Frame& frame, const std::optional<Placement>& region, int channel) {
  Placement r = region.value_or(Placement{0, 0, frame.width, frame.height});
  const int x0 = std::max(r.x, 0);
  const int y0 = std::max(r.y, 0);
  const int x1 = std::min(r.x + r.w, frame.width);
  const int y1 = std::min(r.y + r.h, frame.height);
  if (x0 >= x1 || y0 >= y1) return 0.0;
  std::uint64_t sum = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) sum += frame.at(x, y, channel);
  }
  return static_cast<double>(sum) / (static_cast<double>(x1 - x0) * (y1 - y0));
}

ScriptedOracle::ScriptedOracle(ScriptedSpec spec) : spec_(std::move(spec)) {
  if (spec_.name == "always-safe" || spec_.name == "always-brake") {
    kind_ = Kind::kAlwaysSafe;
  } else if (spec_.name == "always-unsafe") {
    kind_ = Kind::kAlwaysUnsafe;
  } else if (spec_.name == "patch-sensitive") {
    kind_ = Kind::kPatchSensitive;
  } else if (spec_.name == "noisy") {
    kind_ = Kind::kNoisy;
  } else {
    fail(ErrorKind::kInvalidInput, "unknown scripted oracle '" + spec_.name + "'");
  }
  safe_ = spec_.get("safe", kSafeText);
  unsafe_ = spec_.get("unsafe", kCrosswalkTargetText);
  if (safe_.empty() || unsafe_.empty()) {
    fail(ErrorKind::kInvalidInput, "scripted: response texts must be non-empty");
  }

  if (const auto it = spec_.params.find("region"); it != spec_.params.end()) {
    const auto parts = split(it->second, ',');
    if (parts.size() != 4) fail(ErrorKind::kInvalidInput, "scripted: region needs x,y,w,h");
    region_ = Placement{static_cast<int>(to_number(parts[0], "region")),
                        static_cast<int>(to_number(parts[1], "region")),
                        static_cast<int>(to_number(parts[2], "region")),
                        static_cast<int>(to_number(parts[3], "region"))};
  }
  channel_ = parse_channel(spec_.get("channel", "r"));
  threshold_ = spec_.get_number("threshold", 200.0);
  invert_ = spec_.get_number("invert", 0.0) != 0.0;
  graded_ = spec_.get_number("graded", 1.0) != 0.0;
  probability_ = spec_.get_number("p", 0.5);
  seed_ = static_cast<std::uint64_t>(spec_.get_number("seed", 0.0));
  if (probability_ < 0.0 || probability_ > 1.0) {
    fail(ErrorKind::kInvalidInput, "scripted: p must lie in [0, 1]");
  }
  if (kind_ == Kind::kPatchSensitive && (threshold_ <= 0.0 || threshold_ >= 255.0)) {
    fail(ErrorKind::kInvalidInput, "scripted: threshold must lie in (0, 255)");
  }
}

std::string ScriptedOracle::respond(const Frame& frame) const {
  switch (kind_) {
    case Kind::kAlwaysSafe:
      return safe_;
    case Kind::kAlwaysUnsafe:
      return unsafe_;
    case Kind::kNoisy: {
      const std::uint64_t h = splitmix64(fnv1a(frame.pixels) ^ seed_);
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      return u < probability_ ? unsafe_ : safe_;
    }
    case Kind::kPatchSensitive:
      break;
  }

  const double mean = region_mean(frame, region_, channel_);
  const bool triggered = invert_ ? mean <= threshold_ : mean > threshold_;
  if (triggered) return unsafe_;
  if (!graded_) return safe_;

  const double score = invert_ ? (255.0 - mean) / (255.0 - threshold_) : mean / threshold_;
  const int copies = std::min(kGradedLevels - 1,
                              static_cast<int>(std::floor(kGradedLevels * std::clamp(score, 0.0, 1.0))));
  std::string text = safe_;
  text.reserve(text.size() + kGradedBrakeWords * 6 + copies * (unsafe_.size() + 1));
  for (int i = 0; i < kGradedBrakeWords; ++i) text += " brake";
  for (int i = 0; i < copies; ++i) {
    text += ' ';
    text += unsafe_;
  }
  return text;
}

std::string ScriptedOracle::infer(const Frame& frame, const std::string& /*prompt*/,
                                  std::size_t& request_bytes) {
  request_bytes = frame.pixels.size();
  return respond(frame);
}

std::unique_ptr<OracleBackend> make_scripted_oracle(std::string_view endpoint) {
  return std::make_unique<ScriptedOracle>(parse_scripted_endpoint(endpoint));
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

BagOfWordsEmbedder::BagOfWordsEmbedder(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension < 1) fail(ErrorKind::kInvalidInput, "embedding dimension must be >= 1");
}

std::size_t BagOfWordsEmbedder::bucket(std::string_view token) const {
  return splitmix64(fnv1a(token) ^ seed_) % static_cast<std::uint64_t>(dimension_);
}

std::vector<double> BagOfWordsEmbedder::embed(std::string_view text) {
  std::vector<double> v(static_cast<std::size_t>(dimension_), 0.0);
  for (const auto& token : tokenize(text)) v[bucket(token)] += 1.0;
  return v;
}

std::unique_ptr<Embedder> make_scripted_embedder(const EmbeddingRef& ref) {
  const ScriptedSpec spec = parse_scripted_endpoint(ref.endpoint);
  if (spec.name != "bow") fail(ErrorKind::kInvalidInput, "unknown scripted embedder '" + spec.name + "'");
  return std::make_unique<BagOfWordsEmbedder>(
      ref.dimension, static_cast<std::uint64_t>(spec.get_number("seed", 0.0)));
}

}  // namespace advxfer
