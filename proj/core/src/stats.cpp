#include "advxfer/stats.hpp"

#include <cmath>
#include <numeric>

#include "advxfer/error.hpp"
#include "advxfer/random.hpp"

namespace advxfer {

void ClusteredSample::validate() const {
  for (const auto& c : clusters) {
    if (c.empty()) fail(ErrorKind::kInvalidInput, "empty cluster");
    for (int v : c) {
      if (v != 0 && v != 1) fail(ErrorKind::kInvalidInput, "cluster outcome is not 0/1");
    }
  }
}

ClusteredSample clustered_from_logs(std::span<const TrialLog> logs) {
  ClusteredSample out;
  for (const auto& log : logs) {
    std::vector<int> c;
    for (const auto& f : log.frames) c.push_back(f.matched_target ? 1 : 0);
    out.clusters.push_back(std::move(c));
  }
  return out;
}

namespace {

struct ClusterSum {
  double hits;
  double frames;
};

// Rate difference for the assignment in `in_attack` (1 = attack group).
double statistic(const std::vector<ClusterSum>& sums, const std::vector<char>& in_attack) {
  double ah = 0, af = 0, bh = 0, bf = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (in_attack[i]) {
      ah += sums[i].hits;
      af += sums[i].frames;
    } else {
      bh += sums[i].hits;
      bf += sums[i].frames;
    }
  }
  return ah / af - bh / bf;
}

// Number of k-subsets of n, saturating at `cap + 1`.
std::uint64_t choose_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n - k) k = n - k;
  long double c = 1.0L;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (c > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(c)));
}

}  // namespace

PermutationResult cluster_permutation_test(const ClusteredSample& baseline,
                                           const ClusteredSample& attack, std::uint64_t n_perm,
                                           std::uint64_t seed) {
  baseline.validate();
  attack.validate();
  if (n_perm < 99) fail(ErrorKind::kInvalidInput, "n_perm must be >= 99");
  const std::size_t nb = baseline.clusters.size();
  const std::size_t na = attack.clusters.size();
  if (nb + na < 2) fail(ErrorKind::kInvalidInput, "need at least two clusters in total");
  if (nb == 0 || na == 0) fail(ErrorKind::kInvalidInput, "both groups need at least one cluster");

  std::vector<ClusterSum> sums;
  for (const auto* group : {&baseline, &attack}) {
    for (const auto& c : group->clusters) {
      sums.push_back({static_cast<double>(std::accumulate(c.begin(), c.end(), 0)),
                      static_cast<double>(c.size())});
    }
  }
  const std::size_t n = sums.size();
  std::vector<char> assign(n, 0);
  for (std::size_t i = nb; i < n; ++i) assign[i] = 1;

  PermutationResult result;
  result.seed = seed;
  result.statistic = statistic(sums, assign);
  const double threshold = std::abs(result.statistic) - 1e-12;

  const std::uint64_t splits = choose_capped(n, na, n_perm);
  std::uint64_t extreme = 0;
  if (splits <= n_perm) {
    // Enumerate every choice of `na` attack clusters in lexicographic order.
    std::vector<std::size_t> pick(na);
    std::iota(pick.begin(), pick.end(), 0);
    std::uint64_t visited = 0;
    while (true) {
      std::fill(assign.begin(), assign.end(), 0);
      for (std::size_t i : pick) assign[i] = 1;
      if (std::abs(statistic(sums, assign)) >= threshold) ++extreme;
      ++visited;
      std::size_t pos = na;
      while (pos > 0 && pick[pos - 1] == n - na + pos - 1) --pos;
      if (pos == 0) break;
      ++pick[pos - 1];
      for (std::size_t k = pos; k < na; ++k) pick[k] = pick[k - 1] + 1;
    }
    result.exact = true;
    result.n_perm = visited;
    result.p_value = static_cast<double>(extreme) / static_cast<double>(visited);
    return result;
  }

  Rng rng(seed);
  std::vector<char> perm(assign);
  for (std::uint64_t r = 0; r < n_perm; ++r) {
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(perm[i], perm[j]);
    }
    if (std::abs(statistic(sums, perm)) >= threshold) ++extreme;
  }
  result.n_perm = n_perm;
  result.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + n_perm);
  return result;
}

}  // namespace advxfer
