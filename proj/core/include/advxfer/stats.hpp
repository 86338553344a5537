#pragma once

#include <cstdint>
#include <vector>

#include "advxfer/metrics.hpp"

namespace advxfer {

/// Trials as clusters of binary frame outcomes.
struct ClusteredSample {
  std::vector<std::vector<int>> clusters;

  void validate() const;  // outcomes in {0, 1}, clusters non-empty
};

ClusteredSample clustered_from_logs(std::span<const TrialLog> logs);

struct PermutationResult {
  double statistic = 0.0;  // attack rate - baseline rate (micro-averaged)
  double p_value = 1.0;    // two-sided
  std::uint64_t n_perm = 0;
  std::uint64_t seed = 0;
  bool exact = false;      // all group splits enumerated
};

/// Two-sided test of "group label has no effect" that permutes whole trials
/// between the groups. When the number of distinct splits C(n, k) is at most
/// n_perm every split is enumerated and p = #{|s| >= |s_obs|} / C(n, k);
/// otherwise p = (1 + #{|s| >= |s_obs|}) / (1 + n_perm) over seeded random
/// splits. Throws kInvalidInput for n_perm < 99, an empty group or fewer than
/// two clusters.
PermutationResult cluster_permutation_test(const ClusteredSample& baseline,
                                           const ClusteredSample& attack, std::uint64_t n_perm,
                                           std::uint64_t seed);

}  // namespace advxfer
