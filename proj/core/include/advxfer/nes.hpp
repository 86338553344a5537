#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advxfer/eot.hpp"
#include "advxfer/error.hpp"
#include "advxfer/imaging.hpp"
#include "advxfer/oracle.hpp"

namespace advxfer {

/// Natural Evolution Strategies settings.
///
/// sigma and alpha are expressed in units of the full channel range: a
/// perturbation of sigma * eps moves a channel by 255 * sigma * eps levels and
/// an update moves it by 255 * alpha * g levels, where g is the gradient with
/// respect to intensity normalized to [0, 1].
struct NesConfig {
  int n_directions = 20;
  double sigma = 0.1;
  double alpha = 0.02;
  int iterations = 150;
  double lambda_tv = 0.001;
  std::uint64_t seed = 0;

  /// Throws kInvalidInput. iterations == 0 is accepted (no-op run).
  void validate() const;
};

inline constexpr double kChannelRange = 255.0;

using VectorObjective = std::function<double(std::span<const double>)>;

/// Antithetic NES estimate on a plain vector:
///   g = 1/(2 N sigma) * sum_i [f(theta + sigma e_i) - f(theta - sigma e_i)] e_i
/// with e_i ~ N(0, I) drawn from `seed`. Exactly 2N evaluations of `f`.
std::vector<double> estimate_gradient(const VectorObjective& f, std::span<const double> theta,
                                      int n_directions, double sigma, std::uint64_t seed);

/// Objective over patches. `eval_seed` is a fresh per-candidate seed that
/// stochastic objectives (EoT) use to draw their transforms.
using PatchObjective = std::function<double(const Patch&, std::uint64_t eval_seed)>;

struct GradientEstimate {
  std::vector<double> gradient;  // per channel, w.r.t. normalized intensity
  double mean_loss = 0.0;        // mean of the 2N candidate losses
};

/// Patch-level estimator: perturbs channels by 255 * sigma * e_i, evaluates
/// the 2N candidates (concurrently when workers > 1) and reduces them in index
/// order, so the result does not depend on scheduling.
GradientEstimate estimate_gradient(const PatchObjective& f, const Patch& patch,
                                   const NesConfig& config, std::uint64_t seed, int workers = 1);

/// theta <- clip(theta - 255 * alpha * g). Throws kInvalidInput on shape mismatch.
Patch nes_step(const Patch& patch, std::span<const double> gradient, const NesConfig& config);

// ---------------------------------------------------------------------------
// Semantic objective

struct EvaluationFrame {
  Frame frame;
  Placement placement;
};

enum class Aggregation { kMean, kMax };
std::string_view to_string(Aggregation aggregation);
Aggregation parse_aggregation(std::string_view name);

/// Targeted (one oracle) or universal (several oracles) attack objective.
/// Oracles and embedder are borrowed and must outlive the spec.
struct ObjectiveSpec {
  std::vector<OracleClient*> oracles;
  Embedder* embedder = nullptr;
  std::string target_text;
  std::vector<EvaluationFrame> frames;
  EotConfig eot;
  Aggregation aggregation = Aggregation::kMean;
  double lambda_tv = 0.001;
  int patch_width = 0;
  int patch_height = 0;

  void validate() const;
};

/// Embeds the target once; callable as a PatchObjective.
///
/// value = aggregate_over_oracles( mean_over_frames( EoT mean of
///           semantic_loss(embed(response), embed(target)) ) ) + lambda_tv * TV
///
/// EoT transforms for frame f come from derive_seed(eval_seed, f) and are
/// shared by all oracles for that candidate.
class SemanticObjective {
 public:
  explicit SemanticObjective(ObjectiveSpec spec);

  double operator()(const Patch& patch, std::uint64_t eval_seed) const;
  std::vector<double> per_oracle_losses(const Patch& patch, std::uint64_t eval_seed) const;

  const ObjectiveSpec& spec() const noexcept { return spec_; }

 private:
  ObjectiveSpec spec_;
  std::vector<double> target_;
};

double evaluate_objective(const ObjectiveSpec& spec, const Patch& patch,
                          std::uint64_t eval_seed = 0);

// ---------------------------------------------------------------------------
// Optimization loop

struct TraceRecord {
  int iteration = 0;
  double loss = 0.0;            // mean antithetic candidate loss
  double grad_norm = 0.0;
  std::uint64_t queries = 0;    // objective evaluations so far
  std::uint64_t oracle_queries = 0;  // frame-level oracle calls of this run so far
  double wall_time = 0.0;       // seconds since the run started
};

struct Checkpoint {
  int iteration = 0;  // next iteration to run
  Patch patch;
  std::vector<TraceRecord> trace;
  std::uint64_t seed = 0;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Thrown when the objective fails mid-run; a checkpoint has been written
/// when a checkpoint path was configured.
class OptimizationAborted : public Error {
 public:
  OptimizationAborted(ErrorKind kind, const std::string& message, int iteration,
                      std::filesystem::path checkpoint)
      : Error(kind, message), iteration_(iteration), checkpoint_(std::move(checkpoint)) {}

  int iteration() const noexcept { return iteration_; }
  const std::filesystem::path& checkpoint() const noexcept { return checkpoint_; }

 private:
  int iteration_;
  std::filesystem::path checkpoint_;
};

struct OptimizeOptions {
  int workers = 1;
  std::filesystem::path checkpoint_path;  // empty: no checkpoint on failure
  std::optional<Checkpoint> resume;
  const QueryLedger* ledger = nullptr;    // source of TraceRecord::oracle_queries
  std::function<void(const TraceRecord&)> on_iteration;
};

struct OptimizationResult {
  Patch patch;
  std::vector<TraceRecord> trace;
};

/// `iterations` rounds of estimate_gradient + nes_step from
/// create_patch(width, height, derive_seed(seed, "init")). Iteration t draws
/// its directions from derive_seed(seed, "directions", t) and candidate
/// (t, i, sign) evaluates with derive_seed(seed, "eval", t, i, sign), so a
/// resumed run reproduces an uninterrupted one.
OptimizationResult optimize(const PatchObjective& objective, int width, int height,
                            const NesConfig& config, const OptimizeOptions& options = {});

/// Semantic-objective run; spec.lambda_tv is replaced by config.lambda_tv.
OptimizationResult optimize(ObjectiveSpec spec, const NesConfig& config,
                            const OptimizeOptions& options = {});

Patch initial_patch(int width, int height, const NesConfig& config);

void write_trace_jsonl(const std::filesystem::path& path, std::span<const TraceRecord> trace);
std::vector<TraceRecord> read_trace_jsonl(const std::filesystem::path& path);

}  // namespace advxfer
