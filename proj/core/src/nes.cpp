#include "advxfer/nes.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <string>

#include "advxfer/image_io.hpp"
#include "advxfer/parallel.hpp"
#include "advxfer/random.hpp"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;

void NesConfig::validate() const {
  if (n_directions < 1) fail(ErrorKind::kInvalidInput, "nes: n_directions must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorKind::kInvalidInput, "nes: sigma must be positive");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail(ErrorKind::kInvalidInput, "nes: alpha must be positive");
  }
  if (iterations < 0) fail(ErrorKind::kInvalidInput, "nes: iterations must be >= 0");
  if (!(lambda_tv >= 0.0) || !std::isfinite(lambda_tv)) {
    fail(ErrorKind::kInvalidInput, "nes: lambda_tv must be >= 0");
  }
}

namespace {

std::vector<std::vector<double>> draw_directions(std::size_t dim, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> eps(static_cast<std::size_t>(n), std::vector<double>(dim));
  for (auto& e : eps) rng.fill_normal(e);
  return eps;
}

}  // namespace

std::vector<double> estimate_gradient(const VectorObjective& f, std::span<const double> theta,
                                      int n_directions, double sigma, std::uint64_t seed) {
  if (n_directions < 1) fail(ErrorKind::kInvalidInput, "nes: n_directions must be >= 1");
  if (!(sigma > 0.0)) fail(ErrorKind::kInvalidInput, "nes: sigma must be positive");
  const std::size_t dim = theta.size();
  if (dim == 0) fail(ErrorKind::kInvalidInput, "nes: empty parameter vector");
  const auto eps = draw_directions(dim, n_directions, seed);
  std::vector<double> grad(dim, 0.0);
  std::vector<double> probe(dim);
  for (const auto& e : eps) {
    for (std::size_t j = 0; j < dim; ++j) probe[j] = theta[j] + sigma * e[j];
    const double plus = f(probe);
    for (std::size_t j = 0; j < dim; ++j) probe[j] = theta[j] - sigma * e[j];
    const double minus = f(probe);
    const double diff = plus - minus;
    for (std::size_t j = 0; j < dim; ++j) grad[j] += diff * e[j];
  }
  const double scale = 1.0 / (2.0 * n_directions * sigma);
  for (double& g : grad) g *= scale;
  return grad;
}

namespace {

GradientEstimate estimate_patch_gradient(const PatchObjective& f, const Patch& patch,
                                         const NesConfig& config, std::uint64_t direction_seed,
                                         const std::function<std::uint64_t(int, int)>& eval_seed,
                                         int workers) {
  const std::size_t dim = patch.size();
  const int n = config.n_directions;
  const auto eps = draw_directions(dim, n, direction_seed);
  const double step = kChannelRange * config.sigma;

  std::vector<double> losses(2 * static_cast<std::size_t>(n));
  parallel_for(losses.size(), workers, [&](std::size_t c) {
    const int i = static_cast<int>(c / 2);
    const int sign = (c % 2 == 0) ? 1 : -1;
    const auto src = patch.values();
    std::vector<double> values(src.begin(), src.end());
    const auto& e = eps[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < dim; ++j) values[j] += sign * step * e[j];
    losses[c] = f(Patch(patch.width(), patch.height(), std::move(values)), eval_seed(i, sign));
  });

  GradientEstimate out;
  out.gradient.assign(dim, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double plus = losses[2 * static_cast<std::size_t>(i)];
    const double minus = losses[2 * static_cast<std::size_t>(i) + 1];
    total += plus + minus;
    const double diff = plus - minus;
    const auto& e = eps[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < dim; ++j) out.gradient[j] += diff * e[j];
  }
  const double scale = 1.0 / (2.0 * n * config.sigma);
  for (double& g : out.gradient) g *= scale;
  out.mean_loss = total / static_cast<double>(losses.size());
  return out;
}

}  // namespace

GradientEstimate estimate_gradient(const PatchObjective& f, const Patch& patch,
                                   const NesConfig& config, std::uint64_t seed, int workers) {
  config.validate();
  return estimate_patch_gradient(
      f, patch, config, seed,
      [seed](int i, int sign) { return derive_seed(seed, "eval", i, sign); }, workers);
}

Patch nes_step(const Patch& patch, std::span<const double> gradient, const NesConfig& config) {
  if (gradient.size() != patch.size()) {
    fail(ErrorKind::kInvalidInput, "nes: gradient has " + std::to_string(gradient.size()) +
                                       " entries, patch has " + std::to_string(patch.size()));
  }
  const auto src = patch.values();
    std::vector<double> values(src.begin(), src.end());
  const double rate = kChannelRange * config.alpha;
  for (std::size_t j = 0; j < values.size(); ++j) {
    values[j] = std::clamp(values[j] - rate * gradient[j], 0.0, 255.0);
  }
  return Patch(patch.width(), patch.height(), std::move(values));
}

// ---------------------------------------------------------------------------

std::string_view to_string(Aggregation aggregation) {
  return aggregation == Aggregation::kMax ? "max" : "mean";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "max") return Aggregation::kMax;
  fail(ErrorKind::kInvalidInput, "unknown aggregation '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
  if (oracles.empty()) fail(ErrorKind::kInvalidInput, "objective: no oracles");
  for (const auto* o : oracles) {
    if (o == nullptr) fail(ErrorKind::kInvalidInput, "objective: null oracle");
  }
  if (embedder == nullptr) fail(ErrorKind::kInvalidInput, "objective: no embedder");
  if (target_text.empty()) fail(ErrorKind::kInvalidInput, "objective: empty target text");
  if (frames.empty()) fail(ErrorKind::kInvalidInput, "objective: no frames");
  if (patch_width <= 0 || patch_height <= 0) {
    fail(ErrorKind::kInvalidDimension, "objective: patch size must be positive");
  }
  if (!(lambda_tv >= 0.0)) fail(ErrorKind::kInvalidInput, "objective: lambda_tv must be >= 0");
  eot.validate();
}

SemanticObjective::SemanticObjective(ObjectiveSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  target_ = embed_text(*spec_.embedder, spec_.target_text);
}

std::vector<double> SemanticObjective::per_oracle_losses(const Patch& patch,
                                                         std::uint64_t eval_seed) const {
  if (patch.width() != spec_.patch_width || patch.height() != spec_.patch_height) {
    fail(ErrorKind::kInvalidDimension, "objective: patch is " + std::to_string(patch.width()) +
                                           "x" + std::to_string(patch.height()) + ", expected " +
                                           std::to_string(spec_.patch_width) + "x" +
                                           std::to_string(spec_.patch_height));
  }
  std::vector<std::vector<Transform>> transforms;
  transforms.reserve(spec_.frames.size());
  for (std::size_t f = 0; f < spec_.frames.size(); ++f) {
    transforms.push_back(sample_transforms(spec_.eot, derive_seed(eval_seed, f)));
  }
  std::vector<double> out;
  out.reserve(spec_.oracles.size());
  for (OracleClient* oracle : spec_.oracles) {
    const FrameLoss loss = [&](const Frame& frame) {
      const OracleResponse r = oracle->query(frame);
      return semantic_loss(embed_text(*spec_.embedder, r.text), target_);
    };
    double sum = 0.0;
    for (std::size_t f = 0; f < spec_.frames.size(); ++f) {
      const auto& ef = spec_.frames[f];
      sum += expected_loss(loss, ef.frame, ef.placement, patch, transforms[f]);
    }
    out.push_back(sum / static_cast<double>(spec_.frames.size()));
  }
  return out;
}

double SemanticObjective::operator()(const Patch& patch, std::uint64_t eval_seed) const {
  const auto losses = per_oracle_losses(patch, eval_seed);
  double agg = 0.0;
  if (spec_.aggregation == Aggregation::kMax) {
    agg = *std::max_element(losses.begin(), losses.end());
  } else {
    for (double l : losses) agg += l;
    agg /= static_cast<double>(losses.size());
  }
  return agg + spec_.lambda_tv * total_variation(patch);
}

double evaluate_objective(const ObjectiveSpec& spec, const Patch& patch, std::uint64_t eval_seed) {
  return SemanticObjective(spec)(patch, eval_seed);
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json trace_to_json(const TraceRecord& r) {
  return json{{"iteration", r.iteration},     {"loss", r.loss},
              {"grad_norm", r.grad_norm},     {"queries", r.queries},
              {"oracle_queries", r.oracle_queries}, {"wall_time", r.wall_time}};
}

TraceRecord trace_from_json(const json& j) {
  TraceRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.loss = j.at("loss").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.queries = j.at("queries").get<std::uint64_t>();
  r.oracle_queries = j.value("oracle_queries", std::uint64_t{0});
  r.wall_time = j.at("wall_time").get<double>();
  return r;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  // Values are written as strings in %.17g so a resumed patch is bit-identical.
  json values = json::array();
  for (double v : checkpoint.patch.values()) values.push_back(fmt_double(v));
  json trace = json::array();
  for (const auto& r : checkpoint.trace) trace.push_back(trace_to_json(r));
  const json doc{{"iteration", checkpoint.iteration},
                 {"seed", std::to_string(checkpoint.seed)},
                 {"patch",
                  {{"width", checkpoint.patch.width()},
                   {"height", checkpoint.patch.height()},
                   {"values", values}}},
                 {"trace", trace}};
  const std::string text = doc.dump();
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
    const auto& p = doc.at("patch");
    std::vector<double> values;
    for (const auto& v : p.at("values")) values.push_back(std::stod(v.get<std::string>()));
    std::vector<TraceRecord> trace;
    for (const auto& r : doc.at("trace")) trace.push_back(trace_from_json(r));
    return Checkpoint{doc.at("iteration").get<int>(),
                      Patch(p.at("width").get<int>(), p.at("height").get<int>(), std::move(values)),
                      std::move(trace), std::stoull(doc.at("seed").get<std::string>())};
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::kIo, "malformed checkpoint " + path.string() + ": " + e.what());
  }
}

Patch initial_patch(int width, int height, const NesConfig& config) {
  return create_patch(width, height, derive_seed(config.seed, "init"));
}

OptimizationResult optimize(const PatchObjective& objective, int width, int height,
                            const NesConfig& config, const OptimizeOptions& options) {
  config.validate();
  int start = 0;
  if (options.resume) {
    const Checkpoint& cp = *options.resume;
    if (cp.seed != config.seed) {
      fail(ErrorKind::kInvalidInput, "checkpoint seed does not match the run seed");
    }
    if (cp.patch.width() != width || cp.patch.height() != height) {
      fail(ErrorKind::kInvalidDimension, "checkpoint patch size does not match");
    }
    start = cp.iteration;
  }
  OptimizationResult result = options.resume
                                  ? OptimizationResult{options.resume->patch, options.resume->trace}
                                  : OptimizationResult{initial_patch(width, height, config), {}};

  const auto t0 = std::chrono::steady_clock::now();
  const double wall_offset = result.trace.empty() ? 0.0 : result.trace.back().wall_time;
  std::uint64_t evals = result.trace.empty() ? 0 : result.trace.back().queries;
  const std::uint64_t calls_before = result.trace.empty() ? 0 : result.trace.back().oracle_queries;
  const std::size_t ledger_start = options.ledger ? options.ledger->size() : 0;

  for (int t = start; t < config.iterations; ++t) {
    GradientEstimate est;
    try {
      est = estimate_patch_gradient(
          objective, result.patch, config, derive_seed(config.seed, "directions", t),
          [&](int i, int sign) { return derive_seed(config.seed, "eval", t, i, sign); },
          options.workers);
    } catch (const Error& e) {
      if (!options.checkpoint_path.empty()) {
        write_checkpoint(options.checkpoint_path,
                         Checkpoint{t, result.patch, result.trace, config.seed});
      }
      throw OptimizationAborted(e.kind(),
                                "iteration " + std::to_string(t) + ": " + e.what(), t,
                                options.checkpoint_path);
    }
    result.patch = nes_step(result.patch, est.gradient, config);
    evals += 2 * static_cast<std::uint64_t>(config.n_directions);

    TraceRecord rec;
    rec.iteration = t;
    rec.loss = est.mean_loss;
    double sq = 0.0;
    for (double g : est.gradient) sq += g * g;
    rec.grad_norm = std::sqrt(sq);
    rec.queries = evals;
    rec.oracle_queries =
        calls_before + (options.ledger ? options.ledger->size() - ledger_start : 0);
    rec.wall_time =
        wall_offset +
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(rec);
    if (options.on_iteration) options.on_iteration(rec);
  }
  return result;
}

OptimizationResult optimize(ObjectiveSpec spec, const NesConfig& config,
                            const OptimizeOptions& options) {
  spec.lambda_tv = config.lambda_tv;
  const int w = spec.patch_width;
  const int h = spec.patch_height;
  const SemanticObjective objective(std::move(spec));
  return optimize([&objective](const Patch& p, std::uint64_t s) { return objective(p, s); }, w, h,
                  config, options);
}

void write_trace_jsonl(const std::filesystem::path& path, std::span<const TraceRecord> trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : trace) out << trace_to_json(r).dump() << '\n';
}

std::vector<TraceRecord> read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "missing trace " + path.string());
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trace_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      fail(ErrorKind::kIo, "malformed trace line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace advxfer
