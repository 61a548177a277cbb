#pragma once

// Independent oracles used by the test suites. These deliberately avoid the
// library's own algorithm paths: brute force, direct recursions, and plain
// replays only.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cfsim/matching.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/traffic.hpp"

namespace oracles {

// Exhaustive maximum assignment weight over all n! permutations.
inline double brute_force_max_weight(int n, const std::vector<double>& w) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[static_cast<std::size_t>(i) * n + perm[i]];
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Replays a schedule against a matrix; returns the drained matrix.
inline cfsim::traffic::TrafficMatrix replay(const cfsim::traffic::TrafficMatrix& x,
                                            const std::vector<cfsim::matching::Matching>& slots) {
  cfsim::traffic::TrafficMatrix rem = x;
  for (const auto& m : slots)
    for (int i = 0; i < x.n(); ++i) {
      int j = m.assign[i];
      if (j != cfsim::matching::Matching::kIdle && rem(i, j) > 0) --rem(i, j);
    }
  return rem;
}

// Discrete-time FIFO queue with Bernoulli(delta) arrivals and sampled
// service times; returns the mean time in system (waiting plus service).
template <class ServiceSampler>
double bernoulli_fifo_queue(double delta, std::int64_t customers, ServiceSampler&& service,
                            cfsim::RngStream& rng) {
  std::int64_t workload = 0;
  std::int64_t served = 0;
  double total = 0.0;
  while (served < customers) {
    if (rng.uniform01() < delta) {
      std::int64_t u = service();
      total += static_cast<double>(workload + u);
      workload += u;
      ++served;
    }
    if (workload > 0) --workload;
  }
  return total / static_cast<double>(customers);
}

// Direct per-coflow sampling of one CAB frame's aggregate port loads:
// the brute-force counterpart of the gamma-Poisson fast path.
inline bool frame_overflow_brute(int n, double lambda, double entry_mean, std::int64_t frame_size,
                                 cfsim::RngStream& rng) {
  auto model = cfsim::traffic::CoflowModel::uniform_geometric(n, 0.0, entry_mean * n);
  std::vector<std::int64_t> rows(n, 0), cols(n, 0);
  std::int64_t count =
      cfsim::sample_poisson_any(lambda * static_cast<double>(frame_size), rng);
  for (std::int64_t k = 0; k < count; ++k) {
    auto d = cfsim::traffic::sample_demand_sparse(model, rng);
    for (int i = 0; i < n; ++i) {
      rows[i] += d.row_sums[i];
      cols[i] += d.col_sums[i];
    }
  }
  for (int i = 0; i < n; ++i)
    if (rows[i] >= frame_size || cols[i] >= frame_size) return true;
  return false;
}

}  // namespace oracles
